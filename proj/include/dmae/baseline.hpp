#pragma once

#include "dmae/common.hpp"
#include "dmae/dmm.hpp"

#include <cstdint>
#include <vector>

namespace dmae {

struct KMeansOptions {
  int clusters = 2;
  int max_iter = 300;
  double tol = 1e-6;
  int n_init = 10;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centroids;
  Labels labels;
  double inertia = 0.0;
  int iterations = 0;
  int best_run = 0;
  /// Inertia after every assignment step of the winning run.
  std::vector<double> inertia_history;
};

/// Lloyd's algorithm with k-means++ seeding, best of n_init runs by
/// (inertia, run index). An emptied cluster is re-seeded at the point
/// farthest from its current centroid.
KMeansResult kmeans(const Matrix& X, const KMeansOptions& options);

/// Theta = centroids, Phi = 0, identity covariance factors.
DmmParams init_dmm_from_kmeans(const Matrix& centroids, const DissimilarityKind& kind,
                               double alpha);

}  // namespace dmae
