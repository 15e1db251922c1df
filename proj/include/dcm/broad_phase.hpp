#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dcm/geometry.hpp"

namespace dcm {

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

/// Every pair i < j in lexicographic order.
PairList all_pairs(std::size_t n_particles);

/// Pairs whose domain-appropriate signed distance is below `cutoff`, found with
/// a uniform cell grid. Lexicographic order; same result as filtering all_pairs.
PairList candidate_pairs(const Configuration& q, const DomainSpec& dom, double cutoff);

}  // namespace dcm
