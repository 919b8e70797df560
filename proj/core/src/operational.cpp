#include "hoq/operational.hpp"

#include "hoq/typing.hpp"

#include <stdexcept>

namespace hoq {

namespace {

// simultaneous N[v/x][w/y] via a scratch name for y
TermPtr subst2(const TermPtr &n, const std::string &x, const TermPtr &v, const std::string &y,
               const TermPtr &w) {
  std::set<std::string> taken = free_vars(n);
  auto fv = free_vars(v);
  taken.insert(fv.begin(), fv.end());
  fv = free_vars(w);
  taken.insert(fv.begin(), fv.end());
  std::string tmp = y + "#";
  while (taken.count(tmp)) tmp += "#";
  TermPtr t = subst(n, y, var(tmp));
  t = subst(t, x, v);
  return subst(t, tmp, w);
}

[[noreturn]] void stuck(const TermPtr &r) {
  throw std::logic_error("step: stuck non-value " + print_term(r));
}

// contracts a redex (the term under the evaluation context)
Reduction contract(const TermPtr &e, const TermPtr &r) {
  switch (r->kind) {
    case TermKind::App: {
      const TermPtr &f = r->m0;
      const TermPtr &a = r->m1;
      switch (f->kind) {
        case TermKind::Lam:
          return {1.0, plug(e, subst(f->m0, f->name, a)), nullptr};
        case TermKind::Gate: {
          if (a->kind != TermKind::New) stuck(r);
          ComplexMatrix out = f->unitary * a->rho.mat() * adjoint(f->unitary);
          return {1.0, plug(e, new_term(DensityMatrix(std::move(out)))), nullptr};
        }
        case TermKind::Cmp: {
          if (a->kind != TermKind::Pair || a->m0->kind != TermKind::New ||
              a->m1->kind != TermKind::New)
            stuck(r);
          return {1.0, plug(e, new_term(DensityMatrix(tensor(a->m0->rho.mat(), a->m1->rho.mat())))),
                  nullptr};
        }
        case TermKind::Meas: {
          if (a->kind != TermKind::New) stuck(r);
          const DensityMatrix &rho = a->rho;
          std::size_t n = f->meas_n;
          ComplexMatrix b0 = measurement_bra(n, f->meas_i, 0);
          ComplexMatrix b1 = measurement_bra(n, f->meas_i, 1);
          ComplexMatrix r0 = b0 * rho.mat() * adjoint(b0);
          ComplexMatrix r1 = b1 * rho.mat() * adjoint(b1);
          if (n >= 2) {
            // (meas1)/(meas2): outcome rides on the residual state
            TermPtr t0 = plug(e, pair(tt_term(), new_term(DensityMatrix(std::move(r0)))));
            TermPtr t1 = plug(e, pair(ff_term(), new_term(DensityMatrix(std::move(r1)))));
            auto buddy = std::make_shared<Reduction>(Reduction{1.0, std::move(t1), nullptr});
            return {1.0, std::move(t0), std::move(buddy)};
          }
          // (meas3)/(meas4): no residual qubit, outcome rides on the label
          double p0 = trace(r0).real();
          double p1 = trace(r1).real();
          auto buddy = std::make_shared<Reduction>(Reduction{p1, plug(e, ff_term()), nullptr});
          return {p0, plug(e, tt_term()), std::move(buddy)};
        }
        default:
          stuck(r);
      }
    }
    case TermKind::LetPair: {
      if (r->m0->kind != TermKind::Pair) stuck(r);
      return {1.0, plug(e, subst2(r->m1, r->name, r->m0->m0, r->name2, r->m0->m1)), nullptr};
    }
    case TermKind::LetStar: {
      if (r->m0->kind != TermKind::Star) stuck(r);
      return {1.0, plug(e, r->m1), nullptr};
    }
    case TermKind::Match: {
      if (r->m0->kind == TermKind::InjL)
        return {1.0, plug(e, subst(r->m1, r->name, r->m0->m0)), nullptr};
      if (r->m0->kind == TermKind::InjR)
        return {1.0, plug(e, subst(r->m2, r->name2, r->m0->m0)), nullptr};
      stuck(r);
    }
    case TermKind::LetRec: {
      TermPtr unrolled =
          lam(r->name2, r->type, let_rec(r->name, r->type, r->type2, r->name2, r->m0, r->m0));
      return {1.0, plug(e, subst(r->m1, r->name, unrolled)), nullptr};
    }
    default:
      stuck(r);
  }
}

ProbPair big(const TermPtr &m, std::size_t fuel) {
  if (is_tt(m)) return {1.0, 0.0};
  if (is_ff(m)) return {0.0, 1.0};
  if (is_value(m)) return {0.0, 0.0};
  if (fuel == 0) return {0.0, 0.0};
  auto r = step(m);
  ProbPair a = big(r->target, fuel - 1);
  if (!r->buddy) {
    // non-measurement labels are all 1
    return a;
  }
  ProbPair b = big(r->buddy->target, fuel - 1);
  return {r->label * a.p + r->buddy->label * b.p, r->label * a.q + r->buddy->label * b.q};
}

}  // namespace

std::optional<Reduction> step(const TermPtr &m) {
  auto split = split_redex(m);
  if (!split) return std::nullopt;
  return contract(split->context, split->redex);
}

ProbPair bigstep(const TermPtr &m, std::size_t fuel) {
  if (!check({}, m, bit_t()))
    throw std::invalid_argument("bigstep: term does not check at bit");
  return big(m, fuel);
}

RTree reduction_tree(const TermPtr &m, std::size_t fuel) {
  RTree t;
  t.term = m;
  if (fuel == 0) return t;
  auto r = step(m);
  if (!r) return t;
  RTree left = reduction_tree(r->target, fuel - 1);
  left.label = r->label;
  t.children.push_back(std::move(left));
  if (r->buddy) {
    RTree right = reduction_tree(r->buddy->target, fuel - 1);
    right.label = r->buddy->label;
    t.children.push_back(std::move(right));
  }
  return t;
}

}  // namespace hoq
