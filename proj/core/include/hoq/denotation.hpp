#pragma once

#include "hoq/goi.hpp"
#include "hoq/operational.hpp"
#include "hoq/typing.hpp"

#include <cstddef>
#include <memory>
#include <string>

namespace hoq {

inline constexpr std::size_t kDefaultFuel = 10000;
inline constexpr std::size_t kDefaultDepth = 32;

// ----------------------------------------------------------- type mirror ----

struct SemType;
using SemTypePtr = std::shared_ptr<const SemType>;

// Symbolic shape of an interpreted type; ⟦A⊸B⟧ = ⟦A⟧ ⊸ T⟦B⟧.
struct SemType {
  enum class Kind { Qbits, Unit, Lolli, Tensor, Sum, Bang, T };
  Kind kind = Kind::Unit;
  std::size_t qubits = 0;
  SemTypePtr left;
  SemTypePtr right;
};

SemTypePtr sem_type(const TypePtr &t);
std::string print_sem_type(const SemTypePtr &t);

// ------------------------------------------------------------- realizers ----

// Fixed plumbing codes: "eta", "ev", "str", "str_r", "mu", "der", "delta",
// "con", "weak", "phi", "phi_unit", "bang_dist", "dist", "kappa_l",
// "kappa_r", "punit", "tt_hat", "ff_hat", "q_zero", "q_one".
Arrow realizer(const std::string &name);

// Composition of element codes: λx. g (f x).
Arrow mcomp(const Arrow &g, const Arrow &f);
// Functorial actions on codes.
Arrow t_action(const Arrow &c);
Arrow bang_action(const Arrow &c);
// Distributes n outer bangs over a sum: !ⁿ(X+Y) → !ⁿX + !ⁿY.
Arrow dist_n(std::size_t n);
// Case split [f, g] on sum codes.
Arrow cotuple(const Arrow &f, const Arrow &g);

// Bit value codes and the result trees.
Arrow bit_value(bool tt);
Arrow tree_zero();  // t₀
Arrow tree_tt();
Arrow tree_ff();
Arrow tree_test();   // ⟦bit⟧ ⇒ R dispatch onto t_tt / t_ff
Arrow mult_arrow();  // MULT · (P p t): tree t with all labels scaled by p

// ------------------------------------------------------- interpretation ----

// Coercion code for a <: b; throws std::invalid_argument otherwise.
Arrow interp_subtype(const TypePtr &a, const TypePtr &b);

// Constant code I → ⟦DType(c)⟧ (a function from the unit value).
Arrow interp_const(const TermPtr &c);

// Code ⟦Δ⟧ → T⟦A⟧ for a canonical (principal + root coercion) derivation.
Arrow interp(const Derivation &d);

// Fixpoint of a generator h with h·(P !self !env) : U.
Arrow fix(const Arrow &h);                        // lazy self-reference
Arrow fix_chain(const Arrow &h, std::size_t n);   // chain element, c₀ = ⊥

// ------------------------------------------------------------ tree reads ----

struct NodeRead;

class TreeHandle {
 public:
  explicit TreeHandle(Arrow code);
  const Arrow &code() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  friend NodeRead read_node(const TreeHandle &t, bool tt_branch, std::size_t fuel);
};

struct NodeRead {
  double label = 0.0;
  double exhausted = 0.0;  // trace mass lost to the fuel bound while reading
  TreeHandle child;
};

NodeRead read_node(const TreeHandle &t, bool tt_branch, std::size_t fuel);

// Tree with every edge label multiplied by the 0-qbit scalar p.
TreeHandle mult(const Arrow &p, const TreeHandle &t);

// tree(M) for ⊢ M : bit; throws std::invalid_argument if the check fails.
TreeHandle tree_of(const TermPtr &m);

// Sums left-edge labels into p and right-edge labels into q, breadth-first
// to the given depth; node budget scales with fuel.
ProbPair prob(const TreeHandle &t, std::size_t depth, std::size_t fuel);

ProbPair denote(const TermPtr &m, std::size_t depth = kDefaultDepth,
                std::size_t fuel = kDefaultFuel);

}  // namespace hoq
