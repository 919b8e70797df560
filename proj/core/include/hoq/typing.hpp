#pragma once

#include "hoq/syntax.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hoq {

// Canonically ordered by variable name so the context tensor order in the
// interpreter is deterministic.
using Context = std::map<std::string, TypePtr>;

enum class Rule {
  Ax1,
  Ax2,
  LolliI1,
  LolliI2,
  LolliE,
  TensorI,
  TensorE,
  TopI,
  TopE,
  SumIL,
  SumIR,
  SumE,
  Rec,
};

struct Derivation {
  Rule rule = Rule::Ax1;
  Context ctx;  // restricted to free_vars(term)
  TermPtr term;
  TypePtr type;  // principal type of term under ctx
  std::vector<Derivation> premises;
  // rule-specific ! exponents:
  //   LolliE: bangs stripped from the function's principal type
  //   TensorI / SumIL / SumIR: n = common premise bangs, m = conclusion bang
  //   TensorE / SumE: n = bangs pushed onto the binders, m = scrutinee bangs
  std::size_t exp_n = 0;
  std::size_t exp_m = 0;
  TypePtr ascribed;  // set at the root by check; null elsewhere
};

bool subtype(const TypePtr &a, const TypePtr &b);

// Directed join/meet for the subtype preorder; none when the cores clash.
std::optional<TypePtr> type_sup(const TypePtr &a, const TypePtr &b);
std::optional<TypePtr> type_inf(const TypePtr &a, const TypePtr &b);

// DType table; throws std::invalid_argument on non-constants.
TypePtr default_type(const TermPtr &c);

// Principal type and derivation, or none if untypable. ctx may contain
// unused entries; inference restricts to free variables internally.
std::optional<Derivation> infer_principal(const Context &ctx, const TermPtr &m);

// Principal inference followed by a subtype coercion to a; the ascribed type
// is recorded on the root derivation.
std::optional<Derivation> check(const Context &ctx, const TermPtr &m, const TypePtr &a);

std::string print_context(const Context &ctx);

}  // namespace hoq
