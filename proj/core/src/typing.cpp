#include "hoq/typing.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace hoq {

// -------------------------------------------------------------- subtype ----

bool subtype(const TypePtr &a, const TypePtr &b) {
  auto [n, ac] = strip_bangs(a);
  auto [m, bc] = strip_bangs(b);
  if (n == 0 && m > 0) return false;
  if (ac->kind != bc->kind) return false;
  switch (ac->kind) {
    case TypeKind::NQbit:
      return ac->qubits == bc->qubits;
    case TypeKind::Top:
      return true;
    case TypeKind::Lolli:
      return subtype(bc->left, ac->left) && subtype(ac->right, bc->right);
    case TypeKind::Tensor:
    case TypeKind::Sum:
      return subtype(ac->left, bc->left) && subtype(ac->right, bc->right);
    default:
      return false;
  }
}

std::optional<TypePtr> type_sup(const TypePtr &a, const TypePtr &b) {
  auto [n1, ac] = strip_bangs(a);
  auto [n2, bc] = strip_bangs(b);
  std::size_t k = (n1 == 0 || n2 == 0) ? 0 : 1;
  if (ac->kind != bc->kind) return std::nullopt;
  switch (ac->kind) {
    case TypeKind::NQbit:
      if (ac->qubits != bc->qubits) return std::nullopt;
      return bang_n(nqbit(ac->qubits), k);
    case TypeKind::Top:
      return bang_n(top_t(), k);
    case TypeKind::Lolli: {
      auto dom = type_inf(ac->left, bc->left);
      auto cod = type_sup(ac->right, bc->right);
      if (!dom || !cod) return std::nullopt;
      return bang_n(lolli(*dom, *cod), k);
    }
    case TypeKind::Tensor:
    case TypeKind::Sum: {
      auto l = type_sup(ac->left, bc->left);
      auto r = type_sup(ac->right, bc->right);
      if (!l || !r) return std::nullopt;
      TypePtr core = ac->kind == TypeKind::Tensor ? tensor_t(*l, *r) : sum_t(*l, *r);
      return bang_n(core, k);
    }
    default:
      return std::nullopt;
  }
}

std::optional<TypePtr> type_inf(const TypePtr &a, const TypePtr &b) {
  auto [n1, ac] = strip_bangs(a);
  auto [n2, bc] = strip_bangs(b);
  std::size_t k = (n1 == 0 && n2 == 0) ? 0 : 1;
  if (ac->kind != bc->kind) return std::nullopt;
  switch (ac->kind) {
    case TypeKind::NQbit:
      if (ac->qubits != bc->qubits) return std::nullopt;
      return bang_n(nqbit(ac->qubits), k);
    case TypeKind::Top:
      return bang_n(top_t(), k);
    case TypeKind::Lolli: {
      auto dom = type_sup(ac->left, bc->left);
      auto cod = type_inf(ac->right, bc->right);
      if (!dom || !cod) return std::nullopt;
      return bang_n(lolli(*dom, *cod), k);
    }
    case TypeKind::Tensor:
    case TypeKind::Sum: {
      auto l = type_inf(ac->left, bc->left);
      auto r = type_inf(ac->right, bc->right);
      if (!l || !r) return std::nullopt;
      TypePtr core = ac->kind == TypeKind::Tensor ? tensor_t(*l, *r) : sum_t(*l, *r);
      return bang_n(core, k);
    }
    default:
      return std::nullopt;
  }
}

// --------------------------------------------------------------- consts ----

TypePtr default_type(const TermPtr &c) {
  switch (c->kind) {
    case TermKind::New: {
      auto k = static_cast<std::size_t>(std::countr_zero(c->rho.dim));
      return nqbit(k);
    }
    case TermKind::Meas: {
      if (c->meas_n == 1) return lolli(qbit_t(), bang(bit_t()));
      return lolli(nqbit(c->meas_n), tensor_t(bang(bit_t()), nqbit(c->meas_n - 1)));
    }
    case TermKind::Gate: {
      auto k = static_cast<std::size_t>(std::countr_zero(c->unitary.rows));
      return lolli(nqbit(k), nqbit(k));
    }
    case TermKind::Cmp:
      return lolli(tensor_t(nqbit(c->cmp_m), nqbit(c->cmp_n)), nqbit(c->cmp_m + c->cmp_n));
    default:
      throw std::invalid_argument("default_type: not a constant");
  }
}

// ------------------------------------------------------------ inference ----

namespace {

std::optional<Context> restrict_ctx(const Context &ctx, const std::set<std::string> &fv) {
  Context out;
  for (const auto &x : fv) {
    auto it = ctx.find(x);
    if (it == ctx.end()) return std::nullopt;
    out.emplace(x, it->second);
  }
  return out;
}

bool all_bang(const Context &ctx) {
  return std::all_of(ctx.begin(), ctx.end(),
                     [](const auto &e) { return bang_count(e.second) > 0; });
}

// variables free on both sides of a context split must be duplicable
bool shared_bang(const Context &ctx, const std::set<std::string> &a,
                 const std::set<std::string> &b) {
  for (const auto &x : a) {
    if (!b.count(x)) continue;
    auto it = ctx.find(x);
    if (it == ctx.end() || bang_count(it->second) == 0) return false;
  }
  return true;
}

std::set<std::string> minus(std::set<std::string> s, const std::string &x) {
  s.erase(x);
  return s;
}

std::optional<Derivation> infer(const Context &ctx, const TermPtr &m);

Derivation node(Rule r, Context ctx, TermPtr term, TypePtr type) {
  Derivation d;
  d.rule = r;
  d.ctx = std::move(ctx);
  d.term = std::move(term);
  d.type = std::move(type);
  return d;
}

std::optional<Derivation> infer(const Context &ctx, const TermPtr &m) {
  auto rco = restrict_ctx(ctx, free_vars(m));
  if (!rco) return std::nullopt;
  Context rc = std::move(*rco);

  switch (m->kind) {
    case TermKind::Var:
      return node(Rule::Ax1, rc, m, rc.at(m->name));

    case TermKind::New:
    case TermKind::Meas:
    case TermKind::Gate:
    case TermKind::Cmp:
      return node(Rule::Ax2, rc, m, bang(default_type(m)));

    case TermKind::Star:
      return node(Rule::TopI, rc, m, bang(top_t()));

    case TermKind::Lam: {
      Context pctx = rc;
      if (free_vars(m->m0).count(m->name)) pctx[m->name] = m->type;
      auto body = infer(pctx, m->m0);
      if (!body) return std::nullopt;
      bool promote = all_bang(rc);
      TypePtr core = lolli(m->type, body->type);
      auto d = node(promote ? Rule::LolliI2 : Rule::LolliI1, rc, m,
                    promote ? bang(core) : core);
      d.premises.push_back(std::move(*body));
      return d;
    }

    case TermKind::App: {
      if (!shared_bang(rc, free_vars(m->m0), free_vars(m->m1))) return std::nullopt;
      auto df = infer(rc, m->m0);
      if (!df) return std::nullopt;
      auto da = infer(rc, m->m1);
      if (!da) return std::nullopt;
      auto [n, core] = strip_bangs(df->type);
      if (core->kind != TypeKind::Lolli) return std::nullopt;
      if (!subtype(da->type, core->left)) return std::nullopt;
      auto d = node(Rule::LolliE, rc, m, core->right);
      d.exp_n = n;
      d.premises.push_back(std::move(*df));
      d.premises.push_back(std::move(*da));
      return d;
    }

    case TermKind::Pair: {
      if (!shared_bang(rc, free_vars(m->m0), free_vars(m->m1))) return std::nullopt;
      auto d1 = infer(rc, m->m0);
      if (!d1) return std::nullopt;
      auto d2 = infer(rc, m->m1);
      if (!d2) return std::nullopt;
      std::size_t n = std::min(bang_count(d1->type), bang_count(d2->type));
      std::size_t mm = std::min<std::size_t>(n, 1);
      TypePtr a1 = bang_n(strip_n(d1->type, n), mm);
      TypePtr a2 = bang_n(strip_n(d2->type, n), mm);
      auto d = node(Rule::TensorI, rc, m, bang_n(tensor_t(a1, a2), mm));
      d.exp_n = n;
      d.exp_m = mm;
      d.premises.push_back(std::move(*d1));
      d.premises.push_back(std::move(*d2));
      return d;
    }

    case TermKind::LetStar: {
      if (!shared_bang(rc, free_vars(m->m0), free_vars(m->m1))) return std::nullopt;
      auto ds = infer(rc, m->m0);
      if (!ds) return std::nullopt;
      if (strip_bangs(ds->type).second->kind != TypeKind::Top) return std::nullopt;
      auto dn = infer(rc, m->m1);
      if (!dn) return std::nullopt;
      auto d = node(Rule::TopE, rc, m, dn->type);
      d.premises.push_back(std::move(*ds));
      d.premises.push_back(std::move(*dn));
      return d;
    }

    case TermKind::InjL:
    case TermKind::InjR: {
      auto dp = infer(rc, m->m0);
      if (!dp) return std::nullopt;
      auto [n, core] = strip_bangs(dp->type);
      std::size_t mm = std::min<std::size_t>(n, 1);
      TypePtr mine = bang_n(core, mm);
      TypePtr sum = m->kind == TermKind::InjL ? sum_t(mine, m->type) : sum_t(m->type, mine);
      auto d = node(m->kind == TermKind::InjL ? Rule::SumIL : Rule::SumIR, rc, m,
                    bang_n(sum, mm));
      d.exp_n = n;
      d.exp_m = mm;
      d.premises.push_back(std::move(*dp));
      return d;
    }

    case TermKind::LetPair: {
      auto fv_body = minus(minus(free_vars(m->m1), m->name), m->name2);
      if (!shared_bang(rc, free_vars(m->m0), fv_body)) return std::nullopt;
      auto ds = infer(rc, m->m0);
      if (!ds) return std::nullopt;
      auto [ms, core] = strip_bangs(ds->type);
      if (core->kind != TypeKind::Tensor) return std::nullopt;
      std::size_t n =
          ms == 0 ? 0 : std::min(bang_count(m->type), bang_count(m->type2));
      TypePtr target = bang_n(tensor_t(strip_n(m->type, n), strip_n(m->type2, n)), n);
      if (!subtype(ds->type, target)) return std::nullopt;
      Context pctx = rc;
      auto fv1 = free_vars(m->m1);
      if (fv1.count(m->name)) pctx[m->name] = m->type;
      if (fv1.count(m->name2)) pctx[m->name2] = m->type2;
      auto dn = infer(pctx, m->m1);
      if (!dn) return std::nullopt;
      auto d = node(Rule::TensorE, rc, m, dn->type);
      d.exp_n = n;
      d.exp_m = ms;
      d.premises.push_back(std::move(*ds));
      d.premises.push_back(std::move(*dn));
      return d;
    }

    case TermKind::Match: {
      auto fv_l = minus(free_vars(m->m1), m->name);
      auto fv_r = minus(free_vars(m->m2), m->name2);
      auto fv_branches = fv_l;
      fv_branches.insert(fv_r.begin(), fv_r.end());
      // the branches may share linear variables with each other, but not
      // with the scrutinee
      if (!shared_bang(rc, free_vars(m->m0), fv_branches)) return std::nullopt;
      auto ds = infer(rc, m->m0);
      if (!ds) return std::nullopt;
      auto [ms, core] = strip_bangs(ds->type);
      if (core->kind != TypeKind::Sum) return std::nullopt;
      std::size_t n =
          ms == 0 ? 0 : std::min(bang_count(m->type), bang_count(m->type2));
      TypePtr target = bang_n(sum_t(strip_n(m->type, n), strip_n(m->type2, n)), n);
      if (!subtype(ds->type, target)) return std::nullopt;
      Context pctx_l = rc;
      if (free_vars(m->m1).count(m->name)) pctx_l[m->name] = m->type;
      auto dl = infer(pctx_l, m->m1);
      if (!dl) return std::nullopt;
      Context pctx_r = rc;
      if (free_vars(m->m2).count(m->name2)) pctx_r[m->name2] = m->type2;
      auto dr = infer(pctx_r, m->m2);
      if (!dr) return std::nullopt;
      auto join = type_sup(dl->type, dr->type);
      if (!join) return std::nullopt;
      auto d = node(Rule::SumE, rc, m, *join);
      d.exp_n = n;
      d.exp_m = ms;
      d.premises.push_back(std::move(*ds));
      d.premises.push_back(std::move(*dl));
      d.premises.push_back(std::move(*dr));
      return d;
    }

    case TermKind::LetRec: {
      auto fv_m = minus(minus(free_vars(m->m0), m->name), m->name2);
      auto ctx1 = *restrict_ctx(rc, fv_m);
      if (!all_bang(ctx1)) return std::nullopt;
      TypePtr ftype = bang(lolli(m->type, m->type2));
      Context pctx1 = ctx1;
      if (free_vars(m->m0).count(m->name)) pctx1[m->name] = ftype;
      if (free_vars(m->m0).count(m->name2)) pctx1[m->name2] = m->type;
      auto dm = infer(pctx1, m->m0);
      if (!dm) return std::nullopt;
      if (!subtype(dm->type, m->type2)) return std::nullopt;
      Context pctx2 = rc;
      if (free_vars(m->m1).count(m->name)) pctx2[m->name] = ftype;
      auto dn = infer(pctx2, m->m1);
      if (!dn) return std::nullopt;
      auto d = node(Rule::Rec, rc, m, dn->type);
      d.premises.push_back(std::move(*dm));
      d.premises.push_back(std::move(*dn));
      return d;
    }

    case TermKind::Hole:
      return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::optional<Derivation> infer_principal(const Context &ctx, const TermPtr &m) {
  return infer(ctx, m);
}

std::optional<Derivation> check(const Context &ctx, const TermPtr &m, const TypePtr &a) {
  auto d = infer_principal(ctx, m);
  if (!d) return std::nullopt;
  if (!subtype(d->type, a)) return std::nullopt;
  d->ascribed = a;
  return d;
}

std::string print_context(const Context &ctx) {
  std::string out;
  for (const auto &[x, t] : ctx) {
    if (!out.empty()) out += ", ";
    out += x + ":" + print_type(t);
  }
  return out;
}

}  // namespace hoq
