#include "hoq/denotation.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hoq {

namespace {

std::string fresh_var() {
  static std::atomic<unsigned long long> counter{0};
  return "_g" + std::to_string(counter.fetch_add(1));
}

Arrow named(const std::string &name, const Arrow &a) {
  return rename_arrow(name, a);
}

ExprPtr pconst() { return econst(combinator("P")); }

using VarMap = std::map<std::string, ExprPtr>;

std::vector<std::string> names_of(const Context &c) {
  std::vector<std::string> out;
  out.reserve(c.size());
  for (const auto &kv : c) out.push_back(kv.first);
  return out;
}

std::set<std::string> keys_of(const Context &c) {
  std::set<std::string> out;
  for (const auto &kv : c) out.insert(kv.first);
  return out;
}

// CPS destructuring of a right-nested env tuple holding `names` in order.
ExprPtr destructure(const std::vector<std::string> &names, const ExprPtr &env,
                    const std::function<ExprPtr(const VarMap &)> &k) {
  if (names.empty()) return k({});
  VarMap vars;
  std::function<ExprPtr(std::size_t, ExprPtr)> go = [&](std::size_t i, ExprPtr cur) -> ExprPtr {
    if (i + 1 == names.size()) {
      vars[names[i]] = std::move(cur);
      return k(vars);
    }
    std::string a = fresh_var(), r = fresh_var();
    vars[names[i]] = evar(a);
    return eapp(cur, elam(a, elam(r, go(i + 1, evar(r)))));
  };
  return go(0, env);
}

ExprPtr build_env(const std::vector<std::string> &names, const VarMap &vars) {
  if (names.empty()) return econst(combinator("I"));
  ExprPtr acc = vars.at(names.back());
  for (std::size_t i = names.size() - 1; i-- > 0;)
    acc = eapp(pconst(), vars.at(names[i]), acc);
  return acc;
}

// Splits node bindings between two premise sets; shared names are bang-typed
// and get duplicated through con.
ExprPtr route2(const VarMap &vars, const std::set<std::string> &left,
               const std::set<std::string> &right,
               const std::function<ExprPtr(const VarMap &, const VarMap &)> &k) {
  std::vector<std::string> shared;
  VarMap l, r;
  for (const auto &[n, e] : vars) {
    bool il = left.count(n) > 0, ir = right.count(n) > 0;
    if (il && ir) {
      shared.push_back(n);
    } else if (il) {
      l[n] = e;
    } else if (ir) {
      r[n] = e;
    }
  }
  std::function<ExprPtr(std::size_t)> go = [&](std::size_t i) -> ExprPtr {
    if (i == shared.size()) return k(l, r);
    std::string c1 = fresh_var(), c2 = fresh_var();
    l[shared[i]] = evar(c1);
    r[shared[i]] = evar(c2);
    return eapp(eapp(econst(realizer("con")), vars.at(shared[i])),
                elam(c1, elam(c2, go(i + 1))));
  };
  return go(0);
}

// !-packed env: empty ↦ !I, leaf ↦ δ·u, pair ↦ φ·(P (δ·u) rest).
ExprPtr pack_vars(const std::vector<std::string> &names, const VarMap &vars) {
  if (names.empty()) return econst(lca_bang(combinator("I")));
  ExprPtr acc = eapp(econst(realizer("delta")), vars.at(names.back()));
  for (std::size_t i = names.size() - 1; i-- > 0;)
    acc = eapp(econst(realizer("phi")),
               eapp(pconst(), eapp(econst(realizer("delta")), vars.at(names[i])), acc));
  return acc;
}

bool is_id(const Arrow &a) { return a == combinator("I"); }

// ---------------------------------------------------------- fixed codes ----

const Arrow &eta_r() {
  static const Arrow a = [] {
    std::string x = fresh_var(), k = fresh_var();
    return named("eta", bracket_abstract(elam(x, elam(k, eapp(evar(k), evar(x))))));
  }();
  return a;
}

const Arrow &ev_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), f = fresh_var(), x = fresh_var();
    return named("ev", bracket_abstract(
                           elam(w, eapp(evar(w), elam(f, elam(x, eapp(evar(f), evar(x))))))));
  }();
  return a;
}

const Arrow &str_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), x = fresh_var(), t = fresh_var(), k = fresh_var(),
                y = fresh_var();
    return named(
        "str",
        bracket_abstract(elam(
            w, eapp(evar(w),
                    elam(x, elam(t, elam(k, eapp(evar(t),
                                                 elam(y, eapp(evar(k), eapp(pconst(), evar(x),
                                                                            evar(y))))))))))));
  }();
  return a;
}

const Arrow &str2_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), t = fresh_var(), y = fresh_var(), k = fresh_var(),
                x = fresh_var();
    return named(
        "str_r",
        bracket_abstract(elam(
            w, eapp(evar(w),
                    elam(t, elam(y, elam(k, eapp(evar(t),
                                                 elam(x, eapp(evar(k), eapp(pconst(), evar(x),
                                                                            evar(y))))))))))));
  }();
  return a;
}

const Arrow &mu_r() {
  static const Arrow a = [] {
    std::string m = fresh_var(), k = fresh_var(), h = fresh_var();
    return named("mu", bracket_abstract(elam(
                           m, elam(k, eapp(evar(m), elam(h, eapp(evar(h), evar(k))))))));
  }();
  return a;
}

const Arrow &con_r() {
  static const Arrow a = named("con", lca_apply(combinator("W"), combinator("P")));
  return a;
}

const Arrow &weak_r() {
  static const Arrow a = named("weak", lca_apply(combinator("K"), combinator("I")));
  return a;
}

const Arrow &phi_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), u = fresh_var(), v = fresh_var();
    ExprPtr f = econst(combinator("F"));
    return named("phi",
                 bracket_abstract(elam(
                     w, eapp(evar(w),
                             elam(u, elam(v, eapp(f, eapp(econst(combinator("F")),
                                                          ebang(pconst()), evar(u)),
                                                  evar(v))))))));
  }();
  return a;
}

const Arrow &phi_unit_r() {
  static const Arrow a =
      named("phi_unit", lca_apply(combinator("K"), lca_bang(combinator("I"))));
  return a;
}

const Arrow &bang_dist_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), u = fresh_var(), v = fresh_var();
    // λw. W P w (λu v. P (D u K) (F !P_r v))
    return named(
        "bang_dist",
        bracket_abstract(elam(
            w,
            eapp(econst(combinator("W")), pconst(), evar(w),
                 elam(u, elam(v, eapp(pconst(),
                                      eapp(econst(combinator("D")), evar(u),
                                           econst(combinator("K"))),
                                      eapp(econst(combinator("F")),
                                           ebang(econst(combinator("P_r"))), evar(v)))))))));
  }();
  return a;
}

const Arrow &dist_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), s = fresh_var(), z = fresh_var(), d = fresh_var(),
                u = fresh_var();
    // λw. w (λs z. s (λd u. P d (P u z)))
    return named(
        "dist",
        bracket_abstract(elam(
            w, eapp(evar(w),
                    elam(s, elam(z, eapp(evar(s),
                                         elam(d, elam(u, eapp(pconst(), evar(d),
                                                              eapp(pconst(), evar(u),
                                                                   evar(z))))))))))));
  }();
  return a;
}

const Arrow &undist_r() {
  static const Arrow a = [] {
    std::string w = fresh_var(), w1 = fresh_var(), w2 = fresh_var();
    Arrow bal = bang_action(combinator("P_l"));
    Arrow bar = bang_action(combinator("P_r"));
    // λw. (con w)(λw1 w2. P (!P_l w1) (!P_r w2))
    return named("undist",
                 bracket_abstract(elam(
                     w, eapp(eapp(econst(con_r()), evar(w)),
                             elam(w1, elam(w2, eapp(pconst(), eapp(econst(bal), evar(w1)),
                                                    eapp(econst(bar), evar(w2)))))))));
  }();
  return a;
}

const Arrow &kappa_l_r() {
  static const Arrow a = named("kappa_l", lca_apply(combinator("P"), combinator("K")));
  return a;
}

const Arrow &kappa_r_r() {
  static const Arrow a = named("kappa_r", lca_apply(combinator("P"), combinator("Kbar")));
  return a;
}

const Arrow &tt_hat_r() {
  static const Arrow a =
      named("tt_hat", lca_apply(kappa_l_r(), combinator("I")));
  return a;
}

const Arrow &ff_hat_r() {
  static const Arrow a =
      named("ff_hat", lca_apply(kappa_r_r(), combinator("I")));
  return a;
}

const Arrow &q_zero_r() {
  static const Arrow a = named("q_zero", q_state(DensityMatrix::scalar(0.0)));
  return a;
}

const Arrow &q_one_r() {
  static const Arrow a = named("q_one", q_state(DensityMatrix::scalar(1.0)));
  return a;
}

// !ⁿ(X⊠Y) → !ⁿX ⊠ !ⁿY
Arrow undist_n(std::size_t n) {
  if (n == 0) return combinator("I");
  if (n == 1) return undist_r();
  return mcomp(undist_r(), bang_action(undist_n(n - 1)));
}

}  // namespace

// -------------------------------------------------------------- realizer ----

Arrow realizer(const std::string &name) {
  if (name == "eta") return eta_r();
  if (name == "ev") return ev_r();
  if (name == "str") return str_r();
  if (name == "str_r") return str2_r();
  if (name == "mu") return mu_r();
  if (name == "der") return combinator("D");
  if (name == "delta") return combinator("Delta");
  if (name == "con") return con_r();
  if (name == "weak") return weak_r();
  if (name == "phi") return phi_r();
  if (name == "phi_unit") return phi_unit_r();
  if (name == "bang_dist") return bang_dist_r();
  if (name == "dist") return dist_r();
  if (name == "undist") return undist_r();
  if (name == "kappa_l") return kappa_l_r();
  if (name == "kappa_r") return kappa_r_r();
  if (name == "punit") return combinator("I");
  if (name == "tt_hat") return tt_hat_r();
  if (name == "ff_hat") return ff_hat_r();
  if (name == "q_zero") return q_zero_r();
  if (name == "q_one") return q_one_r();
  throw std::invalid_argument("realizer: unknown name " + name);
}

Arrow mcomp(const Arrow &g, const Arrow &f) {
  return lca_apply(lca_apply(combinator("B"), g), f);
}

Arrow t_action(const Arrow &c) {
  std::string v = fresh_var(), x = fresh_var(), a = fresh_var();
  return named("T[" + c->name + "]",
               bracket_abstract(elam(
                   v, elam(x, eapp(evar(v),
                                   elam(a, eapp(evar(x), eapp(econst(c), evar(a)))))))));
}

// !c on box values: F applies c fiberwise, F !c v = !(c v).
Arrow bang_action(const Arrow &c) {
  return named("![" + c->name + "]", lca_apply(combinator("F"), lca_bang(c)));
}

Arrow dist_n(std::size_t n) {
  if (n == 0) return combinator("I");
  if (n == 1) return bang_dist_r();
  return mcomp(bang_dist_r(), bang_action(dist_n(n - 1)));
}

Arrow cotuple(const Arrow &f, const Arrow &g) {
  std::string w = fresh_var(), d = fresh_var(), x = fresh_var();
  return named("cotuple",
               bracket_abstract(elam(
                   w, eapp(evar(w), elam(d, elam(x, eapp(evar(d), econst(f), econst(g),
                                                         evar(x))))))));
}

Arrow bit_value(bool tt) { return tt ? tt_hat_r() : ff_hat_r(); }

// ----------------------------------------------------------------- trees ----

Arrow tree_zero() {
  static const Arrow t = [] {
    auto slot = make_slot("t0");
    Arrow view = slot;
    Arrow node = lca_apply(lca_apply(combinator("Pdot"), q_zero_r()), view);
    Arrow built = lca_apply(combinator("K"), node);
    slot->step = guarded_step(built);
    return named("t0", built);
  }();
  return t;
}

namespace {

Arrow tree_leaf(bool tt) {
  // one weight-1 edge on the chosen side, then all-zero
  Arrow hit = lca_apply(combinator("K"),
                        lca_apply(lca_apply(combinator("Pdot"), q_one_r()), tree_zero()));
  Arrow miss = lca_apply(combinator("K"),
                         lca_apply(lca_apply(combinator("Pdot"), q_zero_r()), tree_zero()));
  Arrow on_tt = tt ? hit : miss;
  Arrow on_ff = tt ? miss : hit;
  std::string b = fresh_var(), d = fresh_var(), u = fresh_var();
  return named(tt ? "t_tt" : "t_ff",
               bracket_abstract(elam(
                   b, eapp(evar(b), elam(d, elam(u, eapp(evar(d), econst(on_tt),
                                                         econst(on_ff), evar(u))))))));
}

}  // namespace

Arrow tree_tt() {
  static const Arrow t = tree_leaf(true);
  return t;
}

Arrow tree_ff() {
  static const Arrow t = tree_leaf(false);
  return t;
}

Arrow tree_test() {
  static const Arrow t = [] {
    Arrow on_tt = lca_apply(combinator("K"), tree_tt());
    Arrow on_ff = lca_apply(combinator("K"), tree_ff());
    std::string b = fresh_var(), d = fresh_var(), u = fresh_var();
    return named("test",
                 bracket_abstract(elam(
                     b, eapp(evar(b), elam(d, elam(u, eapp(evar(d), econst(on_tt),
                                                           econst(on_ff), evar(u))))))));
  }();
  return t;
}

Arrow mult_arrow() {
  static const Arrow m = [] {
    auto slot = make_slot("MULT");
    Arrow view = slot;
    std::string w = fresh_var(), p = fresh_var(), r = fresh_var(), b = fresh_var(),
                p1 = fresh_var(), p2 = fresh_var(), l = fresh_var(), c = fresh_var();
    // λw. w (λp r b. (con p)(λp1 p2. (C_Ṗ→P (r b))(λl c.
    //     Ṗ (A l p1) (MULT (P p2 c)))))
    ExprPtr body = elam(
        w,
        eapp(evar(w),
             elam(p, elam(r, elam(b,
                 eapp(eapp(econst(con_r()), evar(p)),
                      elam(p1, elam(p2,
                          eapp(eapp(econst(combinator("C_Pdot_to_P")),
                                    eapp(evar(r), evar(b))),
                               elam(l, elam(c,
                                   eapp(econst(combinator("Pdot")),
                                        eapp(econst(combinator("A")), evar(l), evar(p1)),
                                        eapp(econst(view),
                                             eapp(pconst(), evar(p2), evar(c)))))))))))))));
    Arrow built = bracket_abstract(body);
    slot->step = guarded_step(built);
    return named("MULT", built);
  }();
  return m;
}

// ------------------------------------------------------------ type mirror ----

SemTypePtr sem_type(const TypePtr &t) {
  auto s = std::make_shared<SemType>();
  switch (t->kind) {
    case TypeKind::NQbit:
      s->kind = SemType::Kind::Qbits;
      s->qubits = t->qubits;
      break;
    case TypeKind::Top:
      s->kind = SemType::Kind::Unit;
      break;
    case TypeKind::Bang:
      s->kind = SemType::Kind::Bang;
      s->left = sem_type(t->left);
      break;
    case TypeKind::Lolli: {
      s->kind = SemType::Kind::Lolli;
      s->left = sem_type(t->left);
      auto tw = std::make_shared<SemType>();
      tw->kind = SemType::Kind::T;
      tw->left = sem_type(t->right);
      s->right = tw;
      break;
    }
    case TypeKind::Tensor:
      s->kind = SemType::Kind::Tensor;
      s->left = sem_type(t->left);
      s->right = sem_type(t->right);
      break;
    case TypeKind::Sum:
      s->kind = SemType::Kind::Sum;
      s->left = sem_type(t->left);
      s->right = sem_type(t->right);
      break;
  }
  return s;
}

std::string print_sem_type(const SemTypePtr &t) {
  switch (t->kind) {
    case SemType::Kind::Qbits:
      return "qbit[" + std::to_string(t->qubits) + "]";
    case SemType::Kind::Unit:
      return "1";
    case SemType::Kind::Lolli:
      return "(" + print_sem_type(t->left) + " -o " + print_sem_type(t->right) + ")";
    case SemType::Kind::Tensor:
      return "(" + print_sem_type(t->left) + " * " + print_sem_type(t->right) + ")";
    case SemType::Kind::Sum:
      return "(" + print_sem_type(t->left) + " + " + print_sem_type(t->right) + ")";
    case SemType::Kind::Bang:
      return "!" + print_sem_type(t->left);
    case SemType::Kind::T:
      return "T" + print_sem_type(t->left);
  }
  return "?";
}

// --------------------------------------------------------------- coercion ----

Arrow interp_subtype(const TypePtr &a, const TypePtr &b) {
  if (!subtype(a, b))
    throw std::invalid_argument("interp_subtype: " + print_type(a) + " is not a subtype of " +
                                print_type(b));
  if (type_equal(a, b)) return combinator("I");
  auto [n, ca] = strip_bangs(a);
  auto [m, cb] = strip_bangs(b);

  Arrow inner = combinator("I");
  if (!type_equal(ca, cb)) {
    switch (ca->kind) {
      case TypeKind::Lolli: {
        Arrow cd = interp_subtype(cb->left, ca->left);
        Arrow cc = interp_subtype(ca->right, cb->right);
        std::string f = fresh_var(), x = fresh_var();
        ExprPtr arg = is_id(cd) ? evar(x) : eapp(econst(cd), evar(x));
        ExprPtr applied = eapp(evar(f), arg);
        ExprPtr body = is_id(cc) ? applied : eapp(econst(t_action(cc)), applied);
        inner = bracket_abstract(elam(f, elam(x, body)));
        break;
      }
      case TypeKind::Tensor: {
        Arrow c1 = interp_subtype(ca->left, cb->left);
        Arrow c2 = interp_subtype(ca->right, cb->right);
        std::string w = fresh_var(), u = fresh_var(), v = fresh_var();
        ExprPtr lu = is_id(c1) ? evar(u) : eapp(econst(c1), evar(u));
        ExprPtr rv = is_id(c2) ? evar(v) : eapp(econst(c2), evar(v));
        inner = bracket_abstract(
            elam(w, eapp(evar(w), elam(u, elam(v, eapp(pconst(), lu, rv))))));
        break;
      }
      case TypeKind::Sum: {
        Arrow c1 = interp_subtype(ca->left, cb->left);
        Arrow c2 = interp_subtype(ca->right, cb->right);
        Arrow bl = is_id(c1) ? kappa_l_r() : mcomp(kappa_l_r(), c1);
        Arrow br = is_id(c2) ? kappa_r_r() : mcomp(kappa_r_r(), c2);
        inner = cotuple(bl, br);
        break;
      }
      default:
        throw std::logic_error("interp_subtype: core mismatch");
    }
  }

  Arrow adapter = combinator("I");
  if (n > m) {
    for (std::size_t i = 0; i < n - m; ++i)
      adapter = is_id(adapter) ? combinator("D") : mcomp(combinator("D"), adapter);
  } else if (m > n) {
    for (std::size_t i = 0; i < m - n; ++i)
      adapter = is_id(adapter) ? combinator("Delta") : mcomp(combinator("Delta"), adapter);
  }

  Arrow lifted = inner;
  if (!is_id(inner))
    for (std::size_t i = 0; i < m; ++i) lifted = bang_action(lifted);

  if (is_id(lifted)) return adapter;
  if (is_id(adapter)) return lifted;
  return mcomp(lifted, adapter);
}

// -------------------------------------------------------------- constants ----

Arrow interp_const(const TermPtr &c) {
  switch (c->kind) {
    case TermKind::New:
      return named("const_new", lca_apply(combinator("K"), q_state(c->rho)));
    case TermKind::Gate: {
      Arrow uu = u_unitary(c->unitary);
      std::string u = fresh_var(), q = fresh_var();
      return named("const_gate",
                   bracket_abstract(elam(
                       u, elam(q, eapp(econst(eta_r()), eapp(econst(uu), evar(q)))))));
    }
    case TermKind::Cmp: {
      std::string u = fresh_var(), w = fresh_var();
      return named("const_cmp",
                   bracket_abstract(elam(
                       u, elam(w, eapp(econst(eta_r()),
                                       eapp(evar(w), econst(combinator("A"))))))));
    }
    case TermKind::Meas: {
      auto branch = [&](int b) -> ExprPtr {
        Arrow pr = pr_proj(c->meas_n, c->meas_i, b);
        Arrow bh = lca_bang(bit_value(b == 0));
        std::string w = fresh_var(), u2 = fresh_var(), e = fresh_var(), k = fresh_var(),
                    q = fresh_var();
        ExprPtr child;
        if (c->meas_n >= 2) {
          // k (P !b̂ (Pr q))
          child = eapp(evar(k), eapp(pconst(), econst(bh), eapp(econst(pr), evar(q))));
        } else {
          // MULT (P (Pr q) (k !b̂))
          child = eapp(econst(mult_arrow()),
                       eapp(pconst(), eapp(econst(pr), evar(q)),
                            eapp(evar(k), econst(bh))));
        }
        return elam(w, eapp(evar(w),
                            elam(u2, elam(e, eapp(evar(e),
                                                  elam(k, elam(q, eapp(econst(combinator("Pdot")),
                                                                       econst(q_zero_r()),
                                                                       child))))))));
      };
      ExprPtr br_tt = branch(0), br_ff = branch(1);
      std::string u = fresh_var(), q = fresh_var(), k = fresh_var(), b = fresh_var(),
                  w2 = fresh_var(), dt = fresh_var(), xp = fresh_var();
      ExprPtr cot = elam(w2, eapp(evar(w2), elam(dt, elam(xp, eapp(evar(dt), br_tt, br_ff,
                                                                   evar(xp))))));
      ExprPtr body = elam(
          u, elam(q, elam(k, elam(b, eapp(cot, eapp(econst(dist_r()),
                                                    eapp(pconst(), evar(b),
                                                         eapp(pconst(), evar(k), evar(q)))))))));
      return named("const_meas", bracket_abstract(body));
    }
    default:
      throw std::invalid_argument("interp_const: not a constant");
  }
}

// ------------------------------------------------------------- fixpoints ----

namespace {

ExprPtr fix_body(const Arrow &h, const Arrow &self) {
  std::string bx = fresh_var(), b1 = fresh_var(), b2 = fresh_var();
  // λbx. (con bx)(λb1 b2. h (P (F !self (δ b1)) b2))
  return elam(bx, eapp(eapp(econst(con_r()), evar(bx)),
                       elam(b1, elam(b2,
                           eapp(econst(h),
                                eapp(pconst(),
                                     eapp(econst(combinator("F")), ebang(econst(self)),
                                          eapp(econst(realizer("delta")), evar(b1))),
                                     evar(b2)))))));
}

}  // namespace

Arrow fix(const Arrow &h) {
  auto slot = make_slot("fix");
  Arrow view = slot;
  Arrow g = bracket_abstract(fix_body(h, view));
  slot->step = guarded_step(g);
  return named("fix", g);
}

Arrow fix_chain(const Arrow &h, std::size_t n) {
  Arrow c = combinator("bot");
  for (std::size_t i = 0; i < n; ++i) c = bracket_abstract(fix_body(h, c));
  return named("fix_chain", c);
}

// ----------------------------------------------------------- interpreter ----

namespace {

Arrow interp_node(const Derivation &d) {
  switch (d.rule) {
    case Rule::Ax1: {
      std::string dv = fresh_var();
      return bracket_abstract(elam(dv, eapp(econst(eta_r()), evar(dv))));
    }

    case Rule::Ax2: {
      Arrow c0 = interp_const(d.term);
      std::string u = fresh_var();
      return bracket_abstract(elam(
          u, eapp(econst(eta_r()),
                  eapp(econst(combinator("F")), ebang(econst(c0)),
                       eapp(econst(phi_unit_r()), evar(u))))));
    }

    case Rule::TopI: {
      std::string u = fresh_var();
      return bracket_abstract(
          elam(u, eapp(econst(eta_r()), econst(lca_bang(combinator("I"))))));
    }

    case Rule::LolliI1: {
      const Derivation &pm = d.premises[0];
      Arrow g = interp(pm);
      auto node_names = names_of(d.ctx);
      auto prem_names = names_of(pm.ctx);
      const std::string &binder = d.term->name;
      bool binder_used = pm.ctx.count(binder) > 0;
      std::string dv = fresh_var(), av = fresh_var();
      ExprPtr body = elam(
          dv, eapp(econst(eta_r()),
                   elam(av, destructure(node_names, evar(dv), [&](const VarMap &vs0) {
                          VarMap vs = vs0;
                          if (binder_used) vs[binder] = evar(av);
                          return eapp(econst(g), build_env(prem_names, vs));
                        }))));
      return bracket_abstract(body);
    }

    case Rule::LolliI2: {
      const Derivation &pm = d.premises[0];
      Arrow g = interp(pm);
      auto node_names = names_of(d.ctx);
      auto prem_names = names_of(pm.ctx);
      const std::string &binder = d.term->name;
      bool binder_used = pm.ctx.count(binder) > 0;
      std::string dp = fresh_var(), ap = fresh_var();
      Arrow curry = bracket_abstract(elam(
          dp, elam(ap, destructure(node_names, evar(dp), [&](const VarMap &vs0) {
                 VarMap vs = vs0;
                 if (binder_used) vs[binder] = evar(ap);
                 return eapp(econst(g), build_env(prem_names, vs));
               }))));
      std::string dv = fresh_var();
      ExprPtr body = elam(
          dv, eapp(econst(eta_r()),
                   eapp(econst(combinator("F")), ebang(econst(curry)),
                        destructure(node_names, evar(dv), [&](const VarMap &vs) {
                          return pack_vars(node_names, vs);
                        }))));
      return bracket_abstract(body);
    }

    case Rule::LolliE: {
      const Derivation &pf = d.premises[0], &pa = d.premises[1];
      Arrow fM = interp(pf), fA = interp(pa);
      TypePtr fcore = strip_bangs(pf.type).second;
      Arrow cm = interp_subtype(pf.type, fcore);
      Arrow carg = interp_subtype(pa.type, fcore->left);
      std::string dv = fresh_var(), kv = fresh_var(), fv = fresh_var(), av = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, keys_of(pf.ctx), keys_of(pa.ctx),
                      [&](const VarMap &vl, const VarMap &vr) {
                        ExprPtr e1 = build_env(names_of(pf.ctx), vl);
                        ExprPtr e2 = build_env(names_of(pa.ctx), vr);
                        ExprPtr fun = is_id(cm) ? evar(fv) : eapp(econst(cm), evar(fv));
                        ExprPtr arg = is_id(carg) ? evar(av) : eapp(econst(carg), evar(av));
                        return elam(kv, eapp(eapp(econst(fM), e1),
                                             elam(fv, eapp(eapp(econst(fA), e2),
                                                           elam(av, eapp(eapp(fun, arg),
                                                                         evar(kv)))))));
                      });
      }));
      return bracket_abstract(body);
    }

    case Rule::TensorI: {
      const Derivation &p1 = d.premises[0], &p2 = d.premises[1];
      Arrow f1 = interp(p1), f2 = interp(p2);
      std::size_t n = d.exp_n, m = d.exp_m;
      Arrow c1 = interp_subtype(p1.type, bang_n(strip_n(p1.type, n), m));
      Arrow c2 = interp_subtype(p2.type, bang_n(strip_n(p2.type, n), m));
      std::string dv = fresh_var(), kv = fresh_var(), v1 = fresh_var(), v2 = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, keys_of(p1.ctx), keys_of(p2.ctx),
                      [&](const VarMap &vl, const VarMap &vr) {
                        ExprPtr e1 = build_env(names_of(p1.ctx), vl);
                        ExprPtr e2 = build_env(names_of(p2.ctx), vr);
                        ExprPtr lv = is_id(c1) ? evar(v1) : eapp(econst(c1), evar(v1));
                        ExprPtr rv = is_id(c2) ? evar(v2) : eapp(econst(c2), evar(v2));
                        ExprPtr result =
                            m == 0 ? eapp(pconst(), lv, rv)
                                   : eapp(econst(phi_r()),
                                          eapp(pconst(),
                                               eapp(econst(realizer("delta")), lv),
                                               eapp(econst(realizer("delta")), rv)));
                        return elam(kv, eapp(eapp(econst(f1), e1),
                                             elam(v1, eapp(eapp(econst(f2), e2),
                                                           elam(v2, eapp(evar(kv), result))))));
                      });
      }));
      return bracket_abstract(body);
    }

    case Rule::TensorE: {
      const Derivation &ps = d.premises[0], &pn = d.premises[1];
      Arrow fS = interp(ps), fN = interp(pn);
      std::size_t nb = d.exp_n;
      const std::string &x = d.term->name, &y = d.term->name2;
      TypePtr target =
          bang_n(tensor_t(strip_n(d.term->type, nb), strip_n(d.term->type2, nb)), nb);
      Arrow cs = interp_subtype(ps.type, target);
      Arrow un = undist_n(nb);
      std::set<std::string> nset = keys_of(pn.ctx);
      nset.erase(x);
      nset.erase(y);
      std::string dv = fresh_var(), kv = fresh_var(), sv = fresh_var(), av = fresh_var(),
                  bv = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, keys_of(ps.ctx), nset, [&](const VarMap &vl, const VarMap &vr) {
          ExprPtr es = build_env(names_of(ps.ctx), vl);
          ExprPtr scr = is_id(cs) ? evar(sv) : eapp(econst(cs), evar(sv));
          if (!is_id(un)) scr = eapp(econst(un), scr);
          VarMap v2 = vr;
          if (pn.ctx.count(x)) v2[x] = evar(av);
          if (pn.ctx.count(y)) v2[y] = evar(bv);
          ExprPtr en = build_env(names_of(pn.ctx), v2);
          return elam(kv, eapp(eapp(econst(fS), es),
                               elam(sv, eapp(scr, elam(av, elam(bv,
                                                  eapp(eapp(econst(fN), en), evar(kv))))))));
        });
      }));
      return bracket_abstract(body);
    }

    case Rule::TopE: {
      const Derivation &ps = d.premises[0], &pn = d.premises[1];
      Arrow fS = interp(ps), fN = interp(pn);
      std::string dv = fresh_var(), kv = fresh_var(), uv = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, keys_of(ps.ctx), keys_of(pn.ctx),
                      [&](const VarMap &vl, const VarMap &vr) {
                        ExprPtr es = build_env(names_of(ps.ctx), vl);
                        ExprPtr en = build_env(names_of(pn.ctx), vr);
                        return elam(kv, eapp(eapp(econst(fS), es),
                                             elam(uv, eapp(eapp(econst(fN), en), evar(kv)))));
                      });
      }));
      return bracket_abstract(body);
    }

    case Rule::SumIL:
    case Rule::SumIR: {
      const Derivation &pm = d.premises[0];
      Arrow fM = interp(pm);
      bool left = d.rule == Rule::SumIL;
      Arrow kap = left ? kappa_l_r() : kappa_r_r();
      std::size_t m = d.exp_m;
      std::string dv = fresh_var(), kv = fresh_var(), vv = fresh_var();
      ExprPtr post;
      if (m == 0) {
        post = eapp(econst(kap), evar(vv));
      } else {
        TypePtr core = strip_bangs(pm.type).second;
        Arrow c2b = interp_subtype(pm.type, bang(bang(core)));
        ExprPtr payload = is_id(c2b) ? evar(vv) : eapp(econst(c2b), evar(vv));
        post = eapp(econst(combinator("F")), ebang(econst(kap)), payload);
      }
      ExprPtr body = elam(dv, elam(kv, eapp(eapp(econst(fM), evar(dv)),
                                            elam(vv, eapp(evar(kv), post)))));
      return bracket_abstract(body);
    }

    case Rule::SumE: {
      const Derivation &ps = d.premises[0], &pl = d.premises[1], &pr = d.premises[2];
      Arrow fS = interp(ps), fL = interp(pl), fR = interp(pr);
      std::size_t nb = d.exp_n;
      const std::string &x = d.term->name, &y = d.term->name2;
      TypePtr target =
          bang_n(sum_t(strip_n(d.term->type, nb), strip_n(d.term->type2, nb)), nb);
      Arrow cs = interp_subtype(ps.type, target);
      Arrow dn = dist_n(nb);
      Arrow cb1 = interp_subtype(pl.type, d.type);
      Arrow cb2 = interp_subtype(pr.type, d.type);

      std::set<std::string> su;
      for (const auto &kv : pl.ctx)
        if (kv.first != x) su.insert(kv.first);
      for (const auto &kv : pr.ctx)
        if (kv.first != y) su.insert(kv.first);
      std::vector<std::string> unames(su.begin(), su.end());

      auto make_br = [&](const Derivation &pb, const std::string &binder, const Arrow &fB,
                         const Arrow &cb) -> ExprPtr {
        std::string w = fresh_var(), a = fresh_var(), e = fresh_var(), u = fresh_var(),
                    k2 = fresh_var(), v = fresh_var();
        return elam(
            w, eapp(evar(w),
                    elam(a, elam(e, eapp(evar(e),
                        elam(u, elam(k2,
                            destructure(unames, evar(u), [&](const VarMap &vs0) {
                              VarMap vs = vs0;
                              if (pb.ctx.count(binder)) vs[binder] = evar(a);
                              ExprPtr res = is_id(cb) ? evar(v) : eapp(econst(cb), evar(v));
                              return eapp(eapp(econst(fB), build_env(names_of(pb.ctx), vs)),
                                          elam(v, eapp(evar(k2), res)));
                            }))))))));
      };
      ExprPtr br1 = make_br(pl, x, fL, cb1);
      ExprPtr br2 = make_br(pr, y, fR, cb2);

      std::string dv = fresh_var(), kv = fresh_var(), sv = fresh_var(), w2 = fresh_var(),
                  dt = fresh_var(), xp = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, keys_of(ps.ctx), su, [&](const VarMap &vl, const VarMap &vr) {
          ExprPtr es = build_env(names_of(ps.ctx), vl);
          ExprPtr eu = build_env(unames, vr);
          ExprPtr scr = is_id(cs) ? evar(sv) : eapp(econst(cs), evar(sv));
          if (!is_id(dn)) scr = eapp(econst(dn), scr);
          ExprPtr cot = elam(w2, eapp(evar(w2), elam(dt, elam(xp, eapp(evar(dt), br1, br2,
                                                                       evar(xp))))));
          return elam(kv, eapp(eapp(econst(fS), es),
                               elam(sv, eapp(cot, eapp(econst(dist_r()),
                                                       eapp(pconst(), scr,
                                                            eapp(pconst(), eu, evar(kv))))))));
        });
      }));
      return bracket_abstract(body);
    }

    case Rule::Rec: {
      const Derivation &pm = d.premises[0], &pn = d.premises[1];
      Arrow fM = interp(pm), fN = interp(pn);
      const std::string &f = d.term->name, &x = d.term->name2;
      Arrow cbm = interp_subtype(pm.type, d.term->type2);

      std::vector<std::string> gnames;
      std::set<std::string> gset;
      for (const auto &kv : pm.ctx)
        if (kv.first != f && kv.first != x) {
          gnames.push_back(kv.first);
          gset.insert(kv.first);
        }

      // generator h · (P !self !env) : ⟦A ⊸ B⟧
      std::string wv = fresh_var(), buv = fresh_var(), bxv = fresh_var(), av = fresh_var(),
                  kv2 = fresh_var(), vv2 = fresh_var();
      ExprPtr env_m = destructure(gnames, eapp(econst(combinator("D")), evar(bxv)),
                                  [&](const VarMap &vs0) {
                                    VarMap vs = vs0;
                                    if (pm.ctx.count(f)) vs[f] = evar(buv);
                                    if (pm.ctx.count(x)) vs[x] = evar(av);
                                    return build_env(names_of(pm.ctx), vs);
                                  });
      ExprPtr res = is_id(cbm) ? evar(vv2) : eapp(econst(cbm), evar(vv2));
      ExprPtr hbody = elam(
          wv, eapp(evar(wv),
                   elam(buv, elam(bxv, elam(av, elam(kv2,
                       eapp(eapp(econst(fM), env_m),
                            elam(vv2, eapp(evar(kv2), res)))))))));
      Arrow g = fix(bracket_abstract(hbody));

      std::set<std::string> nset = keys_of(pn.ctx);
      nset.erase(f);
      std::string dv = fresh_var();
      ExprPtr body = elam(dv, destructure(names_of(d.ctx), evar(dv), [&](const VarMap &vs) {
        return route2(vs, gset, nset, [&](const VarMap &vg, const VarMap &vn) {
          VarMap v2 = vn;
          if (pn.ctx.count(f))
            v2[f] = eapp(econst(combinator("F")), ebang(econst(g)),
                         eapp(econst(realizer("delta")), pack_vars(gnames, vg)));
          return eapp(econst(fN), build_env(names_of(pn.ctx), v2));
        });
      }));
      return bracket_abstract(body);
    }
  }
  throw std::logic_error("interp: unhandled rule");
}

}  // namespace

Arrow interp(const Derivation &d) {
  Arrow base = interp_node(d);
  if (d.ascribed && !type_equal(d.type, d.ascribed)) {
    Arrow co = interp_subtype(d.type, d.ascribed);
    std::string dv = fresh_var(), kv = fresh_var(), vv = fresh_var();
    base = bracket_abstract(
        elam(dv, elam(kv, eapp(eapp(econst(base), evar(dv)),
                               elam(vv, eapp(evar(kv), eapp(econst(co), evar(vv))))))));
  }
  return base;
}

// ------------------------------------------------------------- tree reads ----

struct TreeHandle::Impl {
  Arrow code;
  std::mutex m;
  std::optional<NodeRead> reads[2];
  std::size_t fuels[2] = {0, 0};
};

TreeHandle::TreeHandle(Arrow code) : impl_(std::make_shared<Impl>()) {
  impl_->code = std::move(code);
}

const Arrow &TreeHandle::code() const { return impl_->code; }

NodeRead read_node(const TreeHandle &t, bool tt_branch, std::size_t fuel) {
  auto &impl = *t.impl_;
  int ix = tt_branch ? 0 : 1;
  {
    std::lock_guard<std::mutex> lock(impl.m);
    if (impl.reads[ix] && impl.fuels[ix] >= fuel) return *impl.reads[ix];
  }
  Arrow s = lca_apply(impl.code, bit_value(tt_branch));
  Arrow lab = lca_apply(combinator("Pdot_l"), s);
  RunResult rr = run_token(lab, Token{BigNat(0), DensityMatrix::scalar(1.0)}, fuel);
  double label = 0.0;
  for (const auto &o : rr.outcomes) label += o.state.trace_real();
  NodeRead out{label, rr.exhausted_mass, TreeHandle(lca_apply(combinator("Pdot_r"), s))};
  {
    std::lock_guard<std::mutex> lock(impl.m);
    impl.reads[ix] = out;
    impl.fuels[ix] = fuel;
  }
  return out;
}

TreeHandle mult(const Arrow &p, const TreeHandle &t) {
  return TreeHandle(
      lca_apply(mult_arrow(), lca_apply(lca_apply(combinator("P"), p), t.code())));
}

TreeHandle tree_of(const TermPtr &m) {
  auto d = check({}, m, bit_t());
  if (!d) throw std::invalid_argument("tree_of: term does not check at type bit");
  Arrow e = interp(*d);
  Arrow tcode = lca_apply(e, combinator("I"));
  return TreeHandle(lca_apply(tcode, tree_test()));
}

ProbPair prob(const TreeHandle &t, std::size_t depth, std::size_t fuel) {
  ProbPair acc;
  std::vector<TreeHandle> level{t};
  std::size_t budget = std::max<std::size_t>(fuel / 64, 64);
  for (std::size_t lev = 0; lev < depth && !level.empty(); ++lev) {
    std::vector<TreeHandle> next;
    next.reserve(level.size() * 2);
    for (const TreeHandle &node : level) {
      if (budget == 0) return acc;
      --budget;
      NodeRead lt = read_node(node, true, fuel);
      NodeRead rf = read_node(node, false, fuel);
      acc.p += lt.label;
      acc.q += rf.label;
      if (acc.p + acc.q >= 1.0 - 1e-12) return acc;
      // A probe that lost most of its mass to the fuel cutoff is stuck in a
      // loop; child probes rerun the same prefix and die at the same point.
      if (lt.label == 0.0 && rf.label == 0.0 &&
          lt.exhausted + rf.exhausted > 0.5)
        continue;
      next.push_back(lt.child);
      next.push_back(rf.child);
    }
    level = std::move(next);
  }
  return acc;
}

ProbPair denote(const TermPtr &m, std::size_t depth, std::size_t fuel) {
  return prob(tree_of(m), depth, fuel);
}

}  // namespace hoq
