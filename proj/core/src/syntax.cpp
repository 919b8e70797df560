#include "hoq/syntax.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace hoq {

// ---------------------------------------------------------------- types ----

namespace {
TypePtr mk_type(TypeKind k, std::size_t q, TypePtr l, TypePtr r) {
  auto t = std::make_shared<Type>();
  t->kind = k;
  t->qubits = q;
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}
}  // namespace

TypePtr nqbit(std::size_t n) { return mk_type(TypeKind::NQbit, n, nullptr, nullptr); }
TypePtr qbit_t() { return nqbit(1); }
TypePtr bang(TypePtr t) { return mk_type(TypeKind::Bang, 0, std::move(t), nullptr); }
TypePtr bang_n(TypePtr t, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) t = bang(t);
  return t;
}
TypePtr lolli(TypePtr a, TypePtr b) {
  return mk_type(TypeKind::Lolli, 0, std::move(a), std::move(b));
}
TypePtr top_t() { return mk_type(TypeKind::Top, 0, nullptr, nullptr); }
TypePtr tensor_t(TypePtr a, TypePtr b) {
  return mk_type(TypeKind::Tensor, 0, std::move(a), std::move(b));
}
TypePtr sum_t(TypePtr a, TypePtr b) {
  return mk_type(TypeKind::Sum, 0, std::move(a), std::move(b));
}
TypePtr bit_t() { return sum_t(top_t(), top_t()); }

bool type_equal(const TypePtr &a, const TypePtr &b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case TypeKind::NQbit:
      return a->qubits == b->qubits;
    case TypeKind::Top:
      return true;
    case TypeKind::Bang:
      return type_equal(a->left, b->left);
    default:
      return type_equal(a->left, b->left) && type_equal(a->right, b->right);
  }
}

std::pair<std::size_t, TypePtr> strip_bangs(const TypePtr &t) {
  std::size_t n = 0;
  TypePtr cur = t;
  while (cur->kind == TypeKind::Bang) {
    ++n;
    cur = cur->left;
  }
  return {n, cur};
}

TypePtr strip_n(const TypePtr &t, std::size_t n) {
  TypePtr cur = t;
  for (std::size_t k = 0; k < n; ++k) {
    if (cur->kind != TypeKind::Bang) throw std::logic_error("strip_n: not enough bangs");
    cur = cur->left;
  }
  return cur;
}

std::size_t bang_count(const TypePtr &t) { return strip_bangs(t).first; }

namespace {
// precedence: 0 lolli, 1 sum, 2 tensor, 3 prefix/atom
void print_type_rec(const TypePtr &t, int prec, std::string &out) {
  switch (t->kind) {
    case TypeKind::NQbit:
      if (t->qubits == 1)
        out += "qbit";
      else
        out += "qbit[" + std::to_string(t->qubits) + "]";
      return;
    case TypeKind::Top:
      out += "top";
      return;
    case TypeKind::Bang:
      out += "!";
      print_type_rec(t->left, 3, out);
      return;
    case TypeKind::Lolli: {
      if (prec > 0) out += "(";
      print_type_rec(t->left, 1, out);
      out += " -o ";
      print_type_rec(t->right, 0, out);
      if (prec > 0) out += ")";
      return;
    }
    case TypeKind::Sum: {
      if (t->left->kind == TypeKind::Top && t->right->kind == TypeKind::Top) {
        out += "bit";
        return;
      }
      if (prec > 1) out += "(";
      print_type_rec(t->left, 2, out);
      out += " + ";
      print_type_rec(t->right, 2, out);
      if (prec > 1) out += ")";
      return;
    }
    case TypeKind::Tensor: {
      if (prec > 2) out += "(";
      print_type_rec(t->left, 3, out);
      out += " * ";
      print_type_rec(t->right, 3, out);
      if (prec > 2) out += ")";
      return;
    }
  }
}
}  // namespace

std::string print_type(const TypePtr &t) {
  std::string out;
  print_type_rec(t, 0, out);
  return out;
}

// ---------------------------------------------------------------- terms ----

namespace {
std::shared_ptr<Term> mk_term(TermKind k) {
  auto t = std::make_shared<Term>();
  t->kind = k;
  return t;
}
}  // namespace

TermPtr var(std::string name) {
  auto t = mk_term(TermKind::Var);
  t->name = std::move(name);
  return t;
}
TermPtr lam(std::string x, TypePtr a, TermPtr body) {
  auto t = mk_term(TermKind::Lam);
  t->name = std::move(x);
  t->type = std::move(a);
  t->m0 = std::move(body);
  return t;
}
TermPtr app(TermPtr f, TermPtr arg) {
  auto t = mk_term(TermKind::App);
  t->m0 = std::move(f);
  t->m1 = std::move(arg);
  return t;
}
TermPtr pair(TermPtr a, TermPtr b) {
  auto t = mk_term(TermKind::Pair);
  t->m0 = std::move(a);
  t->m1 = std::move(b);
  return t;
}
TermPtr let_pair(std::string x, TypePtr tx, std::string y, TypePtr ty, TermPtr m, TermPtr n) {
  if (x == y) throw std::invalid_argument("let_pair: binders must differ");
  auto t = mk_term(TermKind::LetPair);
  t->name = std::move(x);
  t->type = std::move(tx);
  t->name2 = std::move(y);
  t->type2 = std::move(ty);
  t->m0 = std::move(m);
  t->m1 = std::move(n);
  return t;
}
TermPtr star() { return mk_term(TermKind::Star); }
TermPtr let_star(TermPtr m, TermPtr n) {
  auto t = mk_term(TermKind::LetStar);
  t->m0 = std::move(m);
  t->m1 = std::move(n);
  return t;
}
TermPtr inj_l(TypePtr right_type, TermPtr payload) {
  auto t = mk_term(TermKind::InjL);
  t->type = std::move(right_type);
  t->m0 = std::move(payload);
  return t;
}
TermPtr inj_r(TypePtr left_type, TermPtr payload) {
  auto t = mk_term(TermKind::InjR);
  t->type = std::move(left_type);
  t->m0 = std::move(payload);
  return t;
}
TermPtr match_term(TermPtr scrutinee, std::string x, TypePtr tx, TermPtr left, std::string y,
                   TypePtr ty, TermPtr right) {
  auto t = mk_term(TermKind::Match);
  t->m0 = std::move(scrutinee);
  t->name = std::move(x);
  t->type = std::move(tx);
  t->m1 = std::move(left);
  t->name2 = std::move(y);
  t->type2 = std::move(ty);
  t->m2 = std::move(right);
  return t;
}
TermPtr let_rec(std::string f, TypePtr a, TypePtr b, std::string x, TermPtr m, TermPtr n) {
  if (f == x) throw std::invalid_argument("let_rec: binders must differ");
  auto t = mk_term(TermKind::LetRec);
  t->name = std::move(f);
  t->type = std::move(a);
  t->type2 = std::move(b);
  t->name2 = std::move(x);
  t->m0 = std::move(m);
  t->m1 = std::move(n);
  return t;
}
TermPtr new_term(DensityMatrix rho) {
  auto t = mk_term(TermKind::New);
  std::size_t d = rho.dim;
  if (d == 0 || (d & (d - 1)) != 0)
    throw std::invalid_argument("new: state dimension must be a power of two");
  if (!rho.validate(kDefaultTol))
    throw std::invalid_argument("new: payload is not a density matrix");
  t->rho = std::move(rho);
  return t;
}
TermPtr meas(std::size_t n, std::size_t i) {
  if (n < 1 || i < 1 || i > n) throw std::invalid_argument("meas: need 1 <= i <= n");
  auto t = mk_term(TermKind::Meas);
  t->meas_n = n;
  t->meas_i = i;
  return t;
}
TermPtr gate(ComplexMatrix u, std::string display_name) {
  std::size_t d = u.rows;
  if (!u.square() || d == 0 || (d & (d - 1)) != 0)
    throw std::invalid_argument("gate: matrix must be square of power-of-two dimension");
  if (!is_unitary(u, kDefaultTol)) throw std::invalid_argument("gate: matrix is not unitary");
  auto t = mk_term(TermKind::Gate);
  t->unitary = std::move(u);
  t->gate_name = std::move(display_name);
  return t;
}
TermPtr cmp(std::size_t m, std::size_t n) {
  if (m < 1 || n < 1) throw std::invalid_argument("cmp: arities must be positive");
  auto t = mk_term(TermKind::Cmp);
  t->cmp_m = m;
  t->cmp_n = n;
  return t;
}
TermPtr hole() { return mk_term(TermKind::Hole); }

TermPtr tt_term() { return inj_l(top_t(), star()); }
TermPtr ff_term() { return inj_r(top_t(), star()); }
bool is_tt(const TermPtr &m) {
  return m->kind == TermKind::InjL && m->m0->kind == TermKind::Star;
}
bool is_ff(const TermPtr &m) {
  return m->kind == TermKind::InjR && m->m0->kind == TermKind::Star;
}

bool is_value(const TermPtr &m) {
  switch (m->kind) {
    case TermKind::Var:
    case TermKind::Lam:
    case TermKind::Star:
    case TermKind::New:
    case TermKind::Meas:
    case TermKind::Gate:
    case TermKind::Cmp:
      return true;
    case TermKind::Pair:
      return is_value(m->m0) && is_value(m->m1);
    case TermKind::InjL:
    case TermKind::InjR:
      return is_value(m->m0);
    default:
      return false;
  }
}

bool term_equal(const TermPtr &a, const TermPtr &b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case TermKind::Var:
      return a->name == b->name;
    case TermKind::Lam:
      return a->name == b->name && type_equal(a->type, b->type) && term_equal(a->m0, b->m0);
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::LetStar:
      return term_equal(a->m0, b->m0) && term_equal(a->m1, b->m1);
    case TermKind::LetPair:
      return a->name == b->name && a->name2 == b->name2 && type_equal(a->type, b->type) &&
             type_equal(a->type2, b->type2) && term_equal(a->m0, b->m0) &&
             term_equal(a->m1, b->m1);
    case TermKind::Star:
    case TermKind::Hole:
      return true;
    case TermKind::InjL:
    case TermKind::InjR:
      return type_equal(a->type, b->type) && term_equal(a->m0, b->m0);
    case TermKind::Match:
      return a->name == b->name && a->name2 == b->name2 && type_equal(a->type, b->type) &&
             type_equal(a->type2, b->type2) && term_equal(a->m0, b->m0) &&
             term_equal(a->m1, b->m1) && term_equal(a->m2, b->m2);
    case TermKind::LetRec:
      return a->name == b->name && a->name2 == b->name2 && type_equal(a->type, b->type) &&
             type_equal(a->type2, b->type2) && term_equal(a->m0, b->m0) &&
             term_equal(a->m1, b->m1);
    case TermKind::New:
      return a->rho.dim == b->rho.dim && approx_equal(a->rho.mat(), b->rho.mat(), 0.0);
    case TermKind::Meas:
      return a->meas_n == b->meas_n && a->meas_i == b->meas_i;
    case TermKind::Gate:
      return approx_equal(a->unitary, b->unitary, 0.0);
    case TermKind::Cmp:
      return a->cmp_m == b->cmp_m && a->cmp_n == b->cmp_n;
  }
  return false;
}

std::set<std::string> free_vars(const TermPtr &m) {
  std::set<std::string> fv;
  switch (m->kind) {
    case TermKind::Var:
      fv.insert(m->name);
      break;
    case TermKind::Lam:
      fv = free_vars(m->m0);
      fv.erase(m->name);
      break;
    case TermKind::App:
    case TermKind::Pair:
    case TermKind::LetStar: {
      fv = free_vars(m->m0);
      auto f1 = free_vars(m->m1);
      fv.insert(f1.begin(), f1.end());
      break;
    }
    case TermKind::LetPair: {
      fv = free_vars(m->m0);
      auto body = free_vars(m->m1);
      body.erase(m->name);
      body.erase(m->name2);
      fv.insert(body.begin(), body.end());
      break;
    }
    case TermKind::InjL:
    case TermKind::InjR:
      fv = free_vars(m->m0);
      break;
    case TermKind::Match: {
      fv = free_vars(m->m0);
      auto l = free_vars(m->m1);
      l.erase(m->name);
      auto r = free_vars(m->m2);
      r.erase(m->name2);
      fv.insert(l.begin(), l.end());
      fv.insert(r.begin(), r.end());
      break;
    }
    case TermKind::LetRec: {
      auto body = free_vars(m->m0);
      body.erase(m->name);
      body.erase(m->name2);
      auto rest = free_vars(m->m1);
      rest.erase(m->name);
      fv.insert(body.begin(), body.end());
      fv.insert(rest.begin(), rest.end());
      break;
    }
    default:
      break;
  }
  return fv;
}

namespace {
std::string fresh_name(const std::string &base, const std::set<std::string> &avoid) {
  if (!avoid.count(base)) return base;
  for (std::size_t k = 1;; ++k) {
    std::string cand = base + "_" + std::to_string(k);
    if (!avoid.count(cand)) return cand;
  }
}

// renames binder occurrences bound at this node so that `avoid` is respected
TermPtr rename_binder(const TermPtr &body, const std::string &old_name, std::string &io_name,
                      const std::set<std::string> &avoid, TermPtr *extra = nullptr) {
  std::set<std::string> all = avoid;
  auto fv = free_vars(body);
  all.insert(fv.begin(), fv.end());
  if (extra && *extra) {
    auto fv2 = free_vars(*extra);
    all.insert(fv2.begin(), fv2.end());
  }
  std::string nn = fresh_name(old_name, all);
  io_name = nn;
  if (nn == old_name) return body;
  return subst(body, old_name, var(nn));
}
}  // namespace

TermPtr subst(const TermPtr &m, const std::string &x, const TermPtr &v) {
  switch (m->kind) {
    case TermKind::Var:
      return m->name == x ? v : m;
    case TermKind::Lam: {
      if (m->name == x) return m;
      std::string b = m->name;
      TermPtr body = m->m0;
      if (free_vars(v).count(b)) {
        std::set<std::string> avoid = free_vars(v);
        avoid.insert(x);
        body = rename_binder(body, b, b, avoid);
      }
      return lam(b, m->type, subst(body, x, v));
    }
    case TermKind::App:
      return app(subst(m->m0, x, v), subst(m->m1, x, v));
    case TermKind::Pair:
      return pair(subst(m->m0, x, v), subst(m->m1, x, v));
    case TermKind::LetStar:
      return let_star(subst(m->m0, x, v), subst(m->m1, x, v));
    case TermKind::LetPair: {
      TermPtr scrut = subst(m->m0, x, v);
      if (m->name == x || m->name2 == x) return let_pair(m->name, m->type, m->name2, m->type2, scrut, m->m1);
      std::string b1 = m->name, b2 = m->name2;
      TermPtr body = m->m1;
      auto fvv = free_vars(v);
      if (fvv.count(b1)) {
        std::set<std::string> avoid = fvv;
        avoid.insert(x);
        avoid.insert(b2);
        body = rename_binder(body, b1, b1, avoid);
      }
      if (fvv.count(b2)) {
        std::set<std::string> avoid = fvv;
        avoid.insert(x);
        avoid.insert(b1);
        body = rename_binder(body, b2, b2, avoid);
      }
      return let_pair(b1, m->type, b2, m->type2, scrut, subst(body, x, v));
    }
    case TermKind::InjL:
      return inj_l(m->type, subst(m->m0, x, v));
    case TermKind::InjR:
      return inj_r(m->type, subst(m->m0, x, v));
    case TermKind::Match: {
      TermPtr scrut = subst(m->m0, x, v);
      TermPtr left = m->m1, right = m->m2;
      std::string b1 = m->name, b2 = m->name2;
      auto fvv = free_vars(v);
      if (b1 != x) {
        if (fvv.count(b1)) {
          std::set<std::string> avoid = fvv;
          avoid.insert(x);
          left = rename_binder(left, b1, b1, avoid);
        }
        left = subst(left, x, v);
      }
      if (b2 != x) {
        if (fvv.count(b2)) {
          std::set<std::string> avoid = fvv;
          avoid.insert(x);
          right = rename_binder(right, b2, b2, avoid);
        }
        right = subst(right, x, v);
      }
      return match_term(scrut, b1, m->type, left, b2, m->type2, right);
    }
    case TermKind::LetRec: {
      std::string f = m->name, xv = m->name2;
      TermPtr body = m->m0, rest = m->m1;
      auto fvv = free_vars(v);
      if (f != x && xv != x) {
        if (fvv.count(f) || fvv.count(xv)) {
          std::set<std::string> avoid = fvv;
          avoid.insert(x);
          if (fvv.count(f)) {
            avoid.insert(xv);
            body = rename_binder(body, f, f, avoid);
            rest = subst(m->m1, m->name, var(f));
          }
          if (fvv.count(xv)) {
            std::set<std::string> avoid2 = fvv;
            avoid2.insert(x);
            avoid2.insert(f);
            body = rename_binder(body, xv, xv, avoid2);
          }
        }
        body = subst(body, x, v);
      } else if (f == x) {
        // x shadowed in both M and N
        return m;
      }
      if (f != x) rest = subst(rest, x, v);
      return let_rec(f, m->type, m->type2, xv, body, rest);
    }
    default:
      return m;  // constants, Star, Hole
  }
}

TermPtr plug(const TermPtr &context, const TermPtr &r) {
  switch (context->kind) {
    case TermKind::Hole:
      return r;
    case TermKind::App:
      return app(plug(context->m0, r), plug(context->m1, r));
    case TermKind::Pair:
      return pair(plug(context->m0, r), plug(context->m1, r));
    case TermKind::LetPair:
      return let_pair(context->name, context->type, context->name2, context->type2,
                      plug(context->m0, r), context->m1);
    case TermKind::LetStar:
      return let_star(plug(context->m0, r), context->m1);
    case TermKind::InjL:
      return inj_l(context->type, plug(context->m0, r));
    case TermKind::InjR:
      return inj_r(context->type, plug(context->m0, r));
    case TermKind::Match:
      return match_term(plug(context->m0, r), context->name, context->type, context->m1,
                        context->name2, context->type2, context->m2);
    default:
      return context;
  }
}

std::optional<EvalSplit> split_redex(const TermPtr &m) {
  if (is_value(m)) return std::nullopt;
  switch (m->kind) {
    case TermKind::App: {
      if (!is_value(m->m0)) {
        auto inner = split_redex(m->m0);
        return EvalSplit{app(inner->context, m->m1), inner->redex};
      }
      if (!is_value(m->m1)) {
        auto inner = split_redex(m->m1);
        return EvalSplit{app(m->m0, inner->context), inner->redex};
      }
      return EvalSplit{hole(), m};
    }
    case TermKind::Pair: {
      if (!is_value(m->m0)) {
        auto inner = split_redex(m->m0);
        return EvalSplit{pair(inner->context, m->m1), inner->redex};
      }
      auto inner = split_redex(m->m1);
      return EvalSplit{pair(m->m0, inner->context), inner->redex};
    }
    case TermKind::LetPair: {
      if (!is_value(m->m0)) {
        auto inner = split_redex(m->m0);
        return EvalSplit{let_pair(m->name, m->type, m->name2, m->type2, inner->context, m->m1),
                         inner->redex};
      }
      return EvalSplit{hole(), m};
    }
    case TermKind::LetStar: {
      if (!is_value(m->m0)) {
        auto inner = split_redex(m->m0);
        return EvalSplit{let_star(inner->context, m->m1), inner->redex};
      }
      return EvalSplit{hole(), m};
    }
    case TermKind::InjL:
    case TermKind::InjR: {
      auto inner = split_redex(m->m0);
      TermPtr ctx = m->kind == TermKind::InjL ? inj_l(m->type, inner->context)
                                              : inj_r(m->type, inner->context);
      return EvalSplit{ctx, inner->redex};
    }
    case TermKind::Match: {
      if (!is_value(m->m0)) {
        auto inner = split_redex(m->m0);
        return EvalSplit{match_term(inner->context, m->name, m->type, m->m1, m->name2, m->type2,
                                    m->m2),
                         inner->redex};
      }
      return EvalSplit{hole(), m};
    }
    case TermKind::LetRec:
      return EvalSplit{hole(), m};
    default:
      return EvalSplit{hole(), m};
  }
}

// --------------------------------------------------------------- parsing ----

std::string ParseError::what() const {
  return "parse error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + message;
}

namespace {

enum class Tok {
  Ident,
  Lambda,    // '\'
  Dot,       // '.'
  Colon,     // ':'
  Comma,     // ','
  LParen,
  RParen,
  LAngle,
  RAngle,
  Star,      // '*'
  Plus,      // '+'
  Bang,      // '!'
  Lolli,     // '-o'
  Arrow,     // '->'
  Pipe,      // '|'
  Equals,    // '='
  Bracket,   // '[ ... ]' raw payload, balanced
  End,
};

struct Token {
  Tok kind;
  std::string text;  // Ident name or Bracket payload
  std::size_t line, col;
};

struct Lexer {
  const std::string &src;
  std::size_t pos = 0, line = 1, col = 1;

  explicit Lexer(const std::string &s) : src(s) {}

  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError{msg, line, col};
  }

  void advance(std::size_t n = 1) {
    for (std::size_t k = 0; k < n && pos < src.size(); ++k) {
      if (src[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++pos;
    }
  }

  void skip_ws() {
    for (;;) {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) advance();
      if (pos + 1 < src.size() && src[pos] == '-' && src[pos + 1] == '-') {
        while (pos < src.size() && src[pos] != '\n') advance();
        continue;
      }
      break;
    }
  }

  Token next() {
    skip_ws();
    std::size_t l = line, c = col;
    if (pos >= src.size()) return {Tok::End, "", l, c};
    char ch = src[pos];
    auto one = [&](Tok k) {
      advance();
      return Token{k, std::string(1, ch), l, c};
    };
    switch (ch) {
      case '\\': return one(Tok::Lambda);
      case '.': return one(Tok::Dot);
      case ':': return one(Tok::Colon);
      case ',': return one(Tok::Comma);
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '<': return one(Tok::LAngle);
      case '>': return one(Tok::RAngle);
      case '*': return one(Tok::Star);
      case '+': return one(Tok::Plus);
      case '!': return one(Tok::Bang);
      case '|': return one(Tok::Pipe);
      case '=': return one(Tok::Equals);
      case '-': {
        if (pos + 1 < src.size() && src[pos + 1] == 'o') {
          advance(2);
          return {Tok::Lolli, "-o", l, c};
        }
        if (pos + 1 < src.size() && src[pos + 1] == '>') {
          advance(2);
          return {Tok::Arrow, "->", l, c};
        }
        fail("stray '-'");
      }
      case '[': {
        // balanced raw payload for new/gate/meas/cmp arguments
        std::size_t depth = 0;
        std::string payload;
        advance();  // consume '['
        for (;;) {
          if (pos >= src.size()) fail("unterminated '['");
          char d = src[pos];
          if (d == '[') ++depth;
          if (d == ']') {
            if (depth == 0) {
              advance();
              return {Tok::Bracket, payload, l, c};
            }
            --depth;
          }
          payload += d;
          advance();
        }
      }
      default:
        break;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::string name;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_' ||
              src[pos] == '\'')) {
        name += src[pos];
        advance();
      }
      return {Tok::Ident, name, l, c};
    }
    fail(std::string("unexpected character '") + ch + "'");
  }
};

struct Parser {
  Lexer lex;
  Token tok;

  explicit Parser(const std::string &src) : lex(src) { tok = lex.next(); }

  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError{msg, tok.line, tok.col};
  }

  void bump() { tok = lex.next(); }

  bool at_ident(const char *kw) const { return tok.kind == Tok::Ident && tok.text == kw; }

  void expect(Tok k, const char *what) {
    if (tok.kind != k) fail(std::string("expected ") + what);
    bump();
  }

  std::string expect_ident() {
    if (tok.kind != Tok::Ident) fail("expected identifier");
    std::string n = tok.text;
    bump();
    return n;
  }

  // ---- types ----

  TypePtr parse_type() { return parse_lolli(); }

  TypePtr parse_lolli() {
    TypePtr a = parse_sum();
    if (tok.kind == Tok::Lolli) {
      bump();
      return lolli(a, parse_lolli());
    }
    return a;
  }

  TypePtr parse_sum() {
    TypePtr a = parse_tens();
    while (tok.kind == Tok::Plus) {
      bump();
      a = sum_t(a, parse_tens());
    }
    return a;
  }

  TypePtr parse_tens() {
    TypePtr a = parse_bang();
    while (tok.kind == Tok::Star) {
      bump();
      a = tensor_t(a, parse_bang());
    }
    return a;
  }

  TypePtr parse_bang() {
    if (tok.kind == Tok::Bang) {
      bump();
      return bang(parse_bang());
    }
    return parse_type_atom();
  }

  TypePtr parse_type_atom() {
    if (tok.kind == Tok::LParen) {
      bump();
      TypePtr t = parse_type();
      expect(Tok::RParen, "')'");
      return t;
    }
    if (tok.kind == Tok::Ident) {
      std::string n = tok.text;
      if (n == "qbit") {
        bump();
        if (tok.kind == Tok::Bracket) {
          std::size_t arity = parse_nat(tok.text);
          bump();
          return nqbit(arity);
        }
        return qbit_t();
      }
      if (n == "bit") {
        bump();
        return bit_t();
      }
      if (n == "top") {
        bump();
        return top_t();
      }
      fail("unknown type '" + n + "'");
    }
    fail("expected a type");
  }

  std::size_t parse_nat(const std::string &text) {
    std::size_t v = 0;
    if (text.empty()) fail("expected a number");
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      if (!std::isdigit(static_cast<unsigned char>(c))) fail("expected a number, got '" + text + "'");
      v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    return v;
  }

  std::pair<std::size_t, std::size_t> parse_nat_pair(const std::string &text) {
    auto comma = text.find(',');
    if (comma == std::string::npos) fail("expected 'm,n' in brackets");
    return {parse_nat(text.substr(0, comma)), parse_nat(text.substr(comma + 1))};
  }

  // ---- matrix payloads ----

  ComplexMatrix parse_matrix_payload(const std::string &text) {
    // JSON array of rows; each entry is [re, im]
    nlohmann::json j;
    try {
      j = nlohmann::json::parse("[" + text + "]");
    } catch (const nlohmann::json::exception &e) {
      fail(std::string("bad matrix literal: ") + e.what());
    }
    if (!j.is_array() || j.empty()) fail("bad matrix literal");
    // The payload text excludes the outermost brackets of the token, so the
    // wrapper above restores them: j is the array of rows.
    std::size_t rows = j.size();
    std::size_t cols = 0;
    std::vector<cplx> entries;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!j[r].is_array()) fail("matrix row must be an array");
      if (r == 0)
        cols = j[r].size();
      else if (j[r].size() != cols)
        fail("ragged matrix literal");
      for (const auto &cell : j[r]) {
        if (cell.is_number()) {
          entries.emplace_back(cell.get<double>(), 0.0);
        } else if (cell.is_array() && cell.size() == 2 && cell[0].is_number() &&
                   cell[1].is_number()) {
          entries.emplace_back(cell[0].get<double>(), cell[1].get<double>());
        } else {
          fail("matrix entry must be a number or [re, im]");
        }
      }
    }
    return ComplexMatrix(rows, cols, std::move(entries));
  }

  DensityMatrix parse_new_payload(const std::string &text) {
    std::string t;
    for (char c : text)
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t == "|0><0|") return ket_density("0");
    if (t == "|1><1|") return ket_density("1");
    if (t == "|+><+|") return ket_density("+");
    try {
      return DensityMatrix(parse_matrix_payload(text));
    } catch (const std::invalid_argument &e) {
      fail(std::string("bad new payload: ") + e.what());
    }
  }

  TermPtr parse_gate_term(const std::string &text) {
    std::string t;
    for (char c : text)
      if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    try {
      if (!t.empty() && (std::isalpha(static_cast<unsigned char>(t[0]))))
        return gate(gate_by_name(t), t);
      return gate(parse_matrix_payload(text));
    } catch (const std::invalid_argument &e) {
      fail(std::string("bad gate payload: ") + e.what());
    }
  }

  // ---- terms ----

  TermPtr parse_term() {
    switch (tok.kind) {
      case Tok::Lambda: {
        bump();
        std::string x = expect_ident();
        expect(Tok::Colon, "':'");
        TypePtr a = parse_type();
        expect(Tok::Dot, "'.'");
        return lam(x, a, parse_term());
      }
      case Tok::Ident:
        if (tok.text == "let") return parse_let();
        if (tok.text == "letrec") return parse_letrec();
        if (tok.text == "match") return parse_match();
        [[fallthrough]];
      default:
        return parse_app();
    }
  }

  TermPtr parse_let() {
    bump();  // let
    if (tok.kind == Tok::Star) {
      bump();
      expect(Tok::Equals, "'='");
      TermPtr m = parse_term();
      if (!at_ident("in")) fail("expected 'in'");
      bump();
      return let_star(m, parse_term());
    }
    expect(Tok::LAngle, "'<'");
    std::string x = expect_ident();
    expect(Tok::Colon, "':'");
    TypePtr tx = parse_type();
    expect(Tok::Comma, "','");
    std::string y = expect_ident();
    expect(Tok::Colon, "':'");
    TypePtr ty = parse_type();
    expect(Tok::RAngle, "'>'");
    expect(Tok::Equals, "'='");
    TermPtr m = parse_term();
    if (!at_ident("in")) fail("expected 'in'");
    bump();
    if (x == y) fail("let-pair binders must differ");
    return let_pair(x, tx, y, ty, m, parse_term());
  }

  TermPtr parse_letrec() {
    bump();  // letrec
    std::string f = expect_ident();
    expect(Tok::Colon, "':'");
    expect(Tok::LParen, "'('");
    TypePtr ab = parse_type();
    expect(Tok::RParen, "')'");
    if (ab->kind != TypeKind::Lolli) fail("letrec annotation must be 'A -o B'");
    TypePtr a = ab->left;
    TypePtr b = ab->right;
    std::string x = expect_ident();
    expect(Tok::Equals, "'='");
    TermPtr m = parse_term();
    if (!at_ident("in")) fail("expected 'in'");
    bump();
    if (f == x) fail("letrec binders must differ");
    return let_rec(f, a, b, x, m, parse_term());
  }

  TermPtr parse_match() {
    bump();  // match
    TermPtr scrut = parse_term();
    if (!at_ident("with")) fail("expected 'with'");
    bump();
    expect(Tok::LParen, "'('");
    std::string x = expect_ident();
    expect(Tok::Colon, "':'");
    TypePtr tx = parse_type();
    expect(Tok::Arrow, "'->'");
    TermPtr left = parse_term();
    expect(Tok::Pipe, "'|'");
    std::string y = expect_ident();
    expect(Tok::Colon, "':'");
    TypePtr ty = parse_type();
    expect(Tok::Arrow, "'->'");
    TermPtr right = parse_term();
    expect(Tok::RParen, "')'");
    return match_term(scrut, x, tx, left, y, ty, right);
  }

  bool starts_atom() const {
    switch (tok.kind) {
      case Tok::LParen:
      case Tok::LAngle:
      case Tok::Star:
        return true;
      case Tok::Ident:
        return tok.text != "in" && tok.text != "with";
      default:
        return false;
    }
  }

  TermPtr parse_app() {
    TermPtr head = parse_atom();
    while (starts_atom()) head = app(head, parse_atom());
    return head;
  }

  TermPtr parse_atom() {
    switch (tok.kind) {
      case Tok::LParen: {
        bump();
        TermPtr t = parse_term();
        expect(Tok::RParen, "')'");
        return t;
      }
      case Tok::LAngle: {
        bump();
        TermPtr a = parse_term();
        expect(Tok::Comma, "','");
        TermPtr b = parse_term();
        expect(Tok::RAngle, "'>'");
        return pair(a, b);
      }
      case Tok::Star:
        bump();
        return star();
      case Tok::Ident: {
        std::string n = tok.text;
        if (n == "tt") {
          bump();
          return tt_term();
        }
        if (n == "ff") {
          bump();
          return ff_term();
        }
        if (n == "inl" || n == "inr") {
          bump();
          if (tok.kind != Tok::Bracket) fail("expected '[type]' after " + n);
          TypePtr other = hoq::parse_type(tok.text);
          bump();
          TermPtr payload = parse_atom();
          return n == "inl" ? inj_l(other, payload) : inj_r(other, payload);
        }
        if (n == "new") {
          bump();
          if (tok.kind != Tok::Bracket) fail("expected '[state]' after new");
          DensityMatrix rho = parse_new_payload(tok.text);
          bump();
          try {
            return new_term(std::move(rho));
          } catch (const std::invalid_argument &e) {
            fail(e.what());
          }
        }
        if (n == "gate") {
          bump();
          if (tok.kind != Tok::Bracket) fail("expected '[unitary]' after gate");
          TermPtr g = parse_gate_term(tok.text);
          bump();
          return g;
        }
        if (n == "meas") {
          bump();
          if (tok.kind != Tok::Bracket) fail("expected '[n,i]' after meas");
          auto [nn, ii] = parse_nat_pair(tok.text);
          bump();
          try {
            return meas(nn, ii);
          } catch (const std::invalid_argument &e) {
            fail(e.what());
          }
        }
        if (n == "cmp") {
          bump();
          if (tok.kind != Tok::Bracket) fail("expected '[m,n]' after cmp");
          auto [mm, nn] = parse_nat_pair(tok.text);
          bump();
          try {
            return cmp(mm, nn);
          } catch (const std::invalid_argument &e) {
            fail(e.what());
          }
        }
        bump();
        return var(n);
      }
      default:
        fail("expected a term");
    }
  }
};

}  // namespace

TermPtr parse(const std::string &source) {
  Parser p(source);
  TermPtr t = p.parse_term();
  if (p.tok.kind != Tok::End) p.fail("trailing input");
  return t;
}

TypePtr parse_type(const std::string &source) {
  Parser p(source);
  TypePtr t = p.parse_type();
  if (p.tok.kind != Tok::End) p.fail("trailing input");
  return t;
}

// -------------------------------------------------------------- printing ----

namespace {

nlohmann::json matrix_json(const ComplexMatrix &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) {
      const cplx &z = m.at(i, j);
      row.push_back(nlohmann::json::array({z.real(), z.imag()}));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string matrix_payload(const ComplexMatrix &m) {
  std::string dump = matrix_json(m).dump();
  // strip outer '[' ']' — the bracket token re-adds them
  return dump.substr(1, dump.size() - 2);
}

bool atom_shaped(const TermPtr &m) {
  switch (m->kind) {
    case TermKind::Var:
    case TermKind::Star:
    case TermKind::Pair:
    case TermKind::New:
    case TermKind::Meas:
    case TermKind::Gate:
    case TermKind::Cmp:
      return true;
    case TermKind::InjL:
      return m->m0->kind == TermKind::Star && m->type->kind == TypeKind::Top;  // prints as tt
    case TermKind::InjR:
      return m->m0->kind == TermKind::Star && m->type->kind == TypeKind::Top;
    default:
      return false;
  }
}

void print_rec(const TermPtr &m, std::string &out);

void print_atom(const TermPtr &m, std::string &out) {
  if (atom_shaped(m)) {
    print_rec(m, out);
  } else {
    out += "(";
    print_rec(m, out);
    out += ")";
  }
}

void print_rec(const TermPtr &m, std::string &out) {
  switch (m->kind) {
    case TermKind::Var:
      out += m->name;
      return;
    case TermKind::Lam:
      out += "\\" + m->name + ":" + print_type(m->type) + ". ";
      print_rec(m->m0, out);
      return;
    case TermKind::App: {
      if (m->m0->kind == TermKind::App) {
        print_rec(m->m0, out);
      } else {
        print_atom(m->m0, out);
      }
      out += " ";
      print_atom(m->m1, out);
      return;
    }
    case TermKind::Pair:
      out += "<";
      print_rec(m->m0, out);
      out += ", ";
      print_rec(m->m1, out);
      out += ">";
      return;
    case TermKind::LetPair:
      out += "let <" + m->name + ":" + print_type(m->type) + ", " + m->name2 + ":" +
             print_type(m->type2) + "> = ";
      print_rec(m->m0, out);
      out += " in ";
      print_rec(m->m1, out);
      return;
    case TermKind::Star:
      out += "*";
      return;
    case TermKind::LetStar:
      out += "let * = ";
      print_rec(m->m0, out);
      out += " in ";
      print_rec(m->m1, out);
      return;
    case TermKind::InjL:
      if (is_tt(m) && m->type->kind == TypeKind::Top) {
        out += "tt";
        return;
      }
      out += "inl[" + print_type(m->type) + "] ";
      print_atom(m->m0, out);
      return;
    case TermKind::InjR:
      if (is_ff(m) && m->type->kind == TypeKind::Top) {
        out += "ff";
        return;
      }
      out += "inr[" + print_type(m->type) + "] ";
      print_atom(m->m0, out);
      return;
    case TermKind::Match:
      out += "match ";
      print_rec(m->m0, out);
      out += " with (" + m->name + ":" + print_type(m->type) + " -> ";
      print_rec(m->m1, out);
      out += " | " + m->name2 + ":" + print_type(m->type2) + " -> ";
      print_rec(m->m2, out);
      out += ")";
      return;
    case TermKind::LetRec:
      out += "letrec " + m->name + ":(" + print_type(m->type) + " -o " + print_type(m->type2) +
             ") " + m->name2 + " = ";
      print_rec(m->m0, out);
      out += " in ";
      print_rec(m->m1, out);
      return;
    case TermKind::New:
      out += "new[" + matrix_payload(m->rho.mat()) + "]";
      return;
    case TermKind::Meas:
      out += "meas[" + std::to_string(m->meas_n) + "," + std::to_string(m->meas_i) + "]";
      return;
    case TermKind::Gate:
      if (!m->gate_name.empty())
        out += "gate[" + m->gate_name + "]";
      else
        out += "gate[" + matrix_payload(m->unitary) + "]";
      return;
    case TermKind::Cmp:
      out += "cmp[" + std::to_string(m->cmp_m) + "," + std::to_string(m->cmp_n) + "]";
      return;
    case TermKind::Hole:
      out += "[.]";
      return;
  }
}

}  // namespace

std::string print_term(const TermPtr &m) {
  std::string out;
  print_rec(m, out);
  return out;
}

}  // namespace hoq
