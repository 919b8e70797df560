#pragma once

#include "hoq/linalg.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hoq {

using BigNat = boost::multiprecision::cpp_int;

// A token travels on an index wire and carries a (subnormalized) state.
struct Token {
  BigNat index;
  DensityMatrix state;
};

struct BranchOutcome {
  BigNat index;
  DensityMatrix state;
};

// Kleisli arrow ℕ ⇸ ℕ over the quantum branching monad: one step maps a
// token to finitely many branch outcomes with Σ tr(out) ≤ tr(in).
// Result of a routing-only step: where the index went, or why it stopped.
struct PureRes {
  enum Kind : int { kExit = 0, kDead = 1, kDiverged = 2 };
  int kind = kDead;
  BigNat out;
};

struct ArrowBox {
  std::function<std::vector<BranchOutcome>(const Token &)> step;
  // Set iff `pure`: the state-free index action.  Pure arrows pass the
  // quantum state through untouched, so their loops are deterministic index
  // maps — run with cycle detection and memoized, no fuel, no state copies.
  // Divergence is booked as exhausted mass once, where a pure region meets
  // its impure caller.
  std::function<PureRes(const BigNat &)> pstep;
  std::string name;
  bool pure = false;
};
using Arrow = std::shared_ptr<const ArrowBox>;

struct RunResult {
  std::vector<BranchOutcome> outcomes;
  double exhausted_mass = 0.0;  // trace mass still looping when fuel ran out
};

// ------------------------------------------------------------ encodings ----

enum class Side { Left, Right };

// ℕ+ℕ ≅ ℕ, even/odd
BigNat encode_sum(Side side, const BigNat &n);
std::pair<Side, BigNat> decode_sum(const BigNat &k);

// ℕ·ℕ ≅ ℕ, Cantor pairing; first component is the fiber
BigNat encode_pair(const BigNat &i, const BigNat &n);
std::pair<BigNat, BigNat> decode_pair(const BigNat &k);

// ----------------------------------------------------------------- core ----

Arrow make_arrow(std::string name,
                 std::function<std::vector<BranchOutcome>(const Token &)> step,
                 bool pure = false);
// Pure arrow defined by its index action; the token step is derived from it.
Arrow make_pure_arrow(std::string name,
                      std::function<PureRes(const BigNat &)> pstep);
// Same behavior under a new display name.
Arrow rename_arrow(std::string name, const Arrow &a);
// An arrow whose step may be assigned after construction (self-reference).
std::shared_ptr<ArrowBox> make_slot(std::string name);
// Step function that forwards to `target` while the run context's
// self-reference depth is below its cap; past the cap the token's mass is
// recorded as exhausted and dropped.  Ties the depth of lazily unrolled
// recursive codes to the run budget so divergent programs run out instead of
// overflowing the stack.
std::function<std::vector<BranchOutcome>(const Token &)> guarded_step(
    Arrow target);

Arrow identity_arrow();
Arrow zero_arrow();  // ⊥: empty outcome list

// Kleisli composition g ⊙ f (f first).
Arrow compose(const Arrow &g, const Arrow &f);
// Blockwise sum under the even/odd coding.
Arrow coprod(const Arrow &f, const Arrow &g);
// Girard execution formula: loop odd-side exits back into f.
Arrow trace_feedback(const Arrow &f);
// Countable copower: f inside every pairing fiber.
Arrow copow(const Arrow &f);

// LCA application a · b and the ! functor on elements.
Arrow lca_apply(const Arrow &a, const Arrow &b);
Arrow lca_bang(const Arrow &a);

// Named elements of the LCA: "B", "C", "I", "K", "Kbar", "W", "D", "Delta",
// "F", "P", "P_l", "P_r", "Pdot", "Pdot_l", "Pdot_r", "C_P_to_Pdot",
// "C_Pdot_to_P", "A", "bot". Throws std::invalid_argument on unknown names.
Arrow combinator(const std::string &name);
// n-th dereliction D_i (D = D_0).
Arrow dereliction(std::size_t i);
// Code of a sequence (x_i); the generator is memoized.
Arrow seq(std::function<Arrow(std::size_t)> gen);

// -------------------------------------------------------------- quantum ----

Arrow q_state(const DensityMatrix &rho);                   // Q_ρ
Arrow q_unitary(const ComplexMatrix &u);                   // Q_U
Arrow q_proj(std::size_t n, std::size_t i, int b);         // Q^n_{|b_i⟩}
Arrow u_unitary(const ComplexMatrix &u);                   // U_U = A · Q_U
Arrow pr_proj(std::size_t n, std::size_t i, int b);        // Pr^n_{|b_i⟩} = A · Q^n

// ------------------------------------------------- bracket abstraction ----

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Var, Const, App, Lam, Bang };
  Kind kind = Kind::Var;
  std::string var;  // Var name; Lam binder
  Arrow constant;   // Const
  ExprPtr e0;       // App fun; Lam body; Bang payload
  ExprPtr e1;       // App arg
};

ExprPtr evar(std::string name);
ExprPtr econst(Arrow a);
ExprPtr eapp(ExprPtr f, ExprPtr a);
template <typename... Rest>
ExprPtr eapp(ExprPtr f, ExprPtr a, ExprPtr b, Rest... rest) {
  return eapp(eapp(std::move(f), std::move(a)), std::move(b), std::move(rest)...);
}
ExprPtr elam(std::string x, ExprPtr body);
// ! of a closed subexpression
ExprPtr ebang(ExprPtr closed);

// Compiles a closed affine λ-expression to an Arrow via I/K/B/C abstraction.
// Throws std::invalid_argument on unbound or non-affine variables.
Arrow bracket_abstract(const ExprPtr &e);

// ------------------------------------------------------------ execution ----

// Runs one step of a with the given loop-iteration budget installed for all
// nested feedback loops; exhausted_mass collects trace mass cut off by fuel.
RunResult run_token(const Arrow &a, const Token &t, std::size_t fuel);

// When set, feedback loops emit one JSON line per requeued token.
void set_goi_trace(std::ostream *os);

namespace detail {
struct RunCtx {
  std::size_t loop_fuel = 10000;
  double exhausted = 0.0;
  double prune_tol = 1e-14;
  std::size_t self_depth = 0;
  std::size_t self_cap = 512;
};
RunCtx &run_ctx();
}  // namespace detail

}  // namespace hoq
