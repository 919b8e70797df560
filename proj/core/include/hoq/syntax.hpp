#pragma once

#include "hoq/linalg.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>

namespace hoq {

// ---------------------------------------------------------------- types ----

enum class TypeKind { NQbit, Bang, Lolli, Top, Tensor, Sum };

struct Type;
using TypePtr = std::shared_ptr<const Type>;

struct Type {
  TypeKind kind = TypeKind::Top;
  std::size_t qubits = 0;  // NQbit arity
  TypePtr left;            // Bang payload; Lolli domain; Tensor/Sum left
  TypePtr right;           // Lolli codomain; Tensor/Sum right
};

TypePtr nqbit(std::size_t n);
TypePtr qbit_t();  // NQbit(1)
TypePtr bang(TypePtr t);
TypePtr bang_n(TypePtr t, std::size_t n);
TypePtr lolli(TypePtr a, TypePtr b);
TypePtr top_t();
TypePtr tensor_t(TypePtr a, TypePtr b);
TypePtr sum_t(TypePtr a, TypePtr b);
TypePtr bit_t();  // Sum(Top, Top)

bool type_equal(const TypePtr &a, const TypePtr &b);
// (count of outer bangs, non-bang core)
std::pair<std::size_t, TypePtr> strip_bangs(const TypePtr &t);
// removes exactly n outer bangs; requires at least n present
TypePtr strip_n(const TypePtr &t, std::size_t n);
std::size_t bang_count(const TypePtr &t);
std::string print_type(const TypePtr &t);

// ---------------------------------------------------------------- terms ----

enum class TermKind {
  Var,
  Lam,
  App,
  Pair,
  LetPair,
  Star,
  LetStar,
  InjL,
  InjR,
  Match,
  LetRec,
  New,
  Meas,
  Gate,
  Cmp,
  Hole,  // evaluation-context marker; never produced by the parser
};

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind = TermKind::Star;

  std::string name;   // Var; Lam binder; LetPair first binder; Match left binder; LetRec f
  std::string name2;  // LetPair second binder; Match right binder; LetRec x

  TypePtr type;   // Lam annotation; LetPair first; InjL/InjR other component; Match left; LetRec A
  TypePtr type2;  // LetPair second; Match right; LetRec B

  TermPtr m0;  // Lam body; App fun; Pair left; LetPair/LetStar/Match scrutinee; Inj payload; LetRec M
  TermPtr m1;  // App arg; Pair right; LetPair/LetStar body; Match left body; LetRec N
  TermPtr m2;  // Match right body

  DensityMatrix rho;       // New
  ComplexMatrix unitary;   // Gate
  std::string gate_name;   // Gate display name when built from a named gate
  std::size_t meas_n = 0;  // Meas arity
  std::size_t meas_i = 0;  // Meas index
  std::size_t cmp_m = 0;   // Cmp left arity
  std::size_t cmp_n = 0;   // Cmp right arity
};

TermPtr var(std::string name);
TermPtr lam(std::string x, TypePtr a, TermPtr body);
TermPtr app(TermPtr f, TermPtr arg);
TermPtr pair(TermPtr a, TermPtr b);
TermPtr let_pair(std::string x, TypePtr tx, std::string y, TypePtr ty, TermPtr m, TermPtr n);
TermPtr star();
TermPtr let_star(TermPtr m, TermPtr n);
TermPtr inj_l(TypePtr right_type, TermPtr payload);
TermPtr inj_r(TypePtr left_type, TermPtr payload);
TermPtr match_term(TermPtr scrutinee, std::string x, TypePtr tx, TermPtr left, std::string y,
                   TypePtr ty, TermPtr right);
TermPtr let_rec(std::string f, TypePtr a, TypePtr b, std::string x, TermPtr m, TermPtr n);
TermPtr new_term(DensityMatrix rho);
TermPtr meas(std::size_t n, std::size_t i);
TermPtr gate(ComplexMatrix u, std::string display_name = "");
TermPtr cmp(std::size_t m, std::size_t n);
TermPtr hole();

TermPtr tt_term();  // inl[top] *
TermPtr ff_term();  // inr[top] *
bool is_tt(const TermPtr &m);
bool is_ff(const TermPtr &m);

bool is_value(const TermPtr &m);
bool term_equal(const TermPtr &a, const TermPtr &b);

std::set<std::string> free_vars(const TermPtr &m);
// capture-avoiding M[v/x]
TermPtr subst(const TermPtr &m, const std::string &x, const TermPtr &v);

struct EvalSplit {
  TermPtr context;  // contains exactly one Hole
  TermPtr redex;
};

// substitutes r for the unique Hole in context
TermPtr plug(const TermPtr &context, const TermPtr &r);
// none exactly on values; otherwise the unique E[redex] decomposition
std::optional<EvalSplit> split_redex(const TermPtr &m);

// -------------------------------------------------------------- surface ----

struct ParseError {
  std::string message;
  std::size_t line = 0;
  std::size_t column = 0;
  std::string what() const;
};

// throws ParseError on malformed input
TermPtr parse(const std::string &source);
TypePtr parse_type(const std::string &source);

std::string print_term(const TermPtr &m);

}  // namespace hoq
