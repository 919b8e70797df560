#pragma once

#include "hoq/syntax.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

namespace hoq {

// One small-step reduction. Measurement rules come in pairs: the returned
// reduction is the tt / outcome-0 branch and carries its outcome-1 buddy.
struct Reduction {
  double label = 1.0;
  TermPtr target;
  std::shared_ptr<Reduction> buddy;
};

struct ProbPair {
  double p = 0.0;
  double q = 0.0;
};

// The unique applicable reduction, or none on a value. Throws
// std::logic_error on stuck non-values (impossible for closed typable terms).
std::optional<Reduction> step(const TermPtr &m);

// Fuel-indexed big-step approximant of a closed bit-typed term; throws
// std::invalid_argument when the term does not check at bit.
ProbPair bigstep(const TermPtr &m, std::size_t fuel);

struct RTree {
  double label = 1.0;  // label of the edge into this node; 1 at the root
  TermPtr term;
  std::vector<RTree> children;
};

// Full labeled branching tree of reductions, cut off at depth fuel.
RTree reduction_tree(const TermPtr &m, std::size_t fuel);

}  // namespace hoq
