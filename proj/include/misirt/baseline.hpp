#pragma once

// Listwise-deletion comparator: drop every person with a missing response
// and fit the plain 2PNO model to what is left.

#include "misirt/model.hpp"
#include "misirt/sampler.hpp"

#include <cstddef>
#include <vector>

namespace misirt {

struct CompleteCaseDataset {
  Dataset data;
  /// person_index[k] is the original row of retained person k (increasing).
  std::vector<std::size_t> person_index;
};

/// Keeps the rows with no missing cell, in their original order. Throws
/// DataError when no row survives.
CompleteCaseDataset listwise_delete(const Dataset& data);

/// Response-only Gibbs sweeps (Z, theta, a, b) with a N(0, 1) ability
/// prior. The draw store has no zeta, tau, gamma or covariance columns.
DrawStore fit_irt_only(const CompleteCaseDataset& data, const SamplerConfig& config);

}  // namespace misirt
