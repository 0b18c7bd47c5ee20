#include "dmae/baseline.hpp"

#include <limits>
#include <random>
#include <sstream>

namespace dmae {

namespace {

struct Assignment {
  Labels labels;
  Vector sq_dist;
  double inertia = 0.0;
};

Assignment assign(const Matrix& X, const Matrix& centroids) {
  Assignment out;
  out.labels.resize(static_cast<std::size_t>(X.rows()));
  out.sq_dist.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
      const double d = (X.row(i) - centroids.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        best_k = static_cast<int>(k);
      }
    }
    out.labels[static_cast<std::size_t>(i)] = best_k;
    out.sq_dist[i] = best;
    out.inertia += best;
  }
  return out;
}

Matrix seed_plus_plus(const Matrix& X, int k_count, std::mt19937_64& rng) {
  const Eigen::Index n = X.rows();
  Matrix centroids(k_count, X.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = X.row(pick(rng));
  Vector closest = (X.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 1; k < k_count; ++k) {
    const double total = closest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target && closest[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(k) = X.row(chosen);
    closest = closest.cwiseMin((X.rowwise() - centroids.row(k)).rowwise().squaredNorm());
  }
  return centroids;
}

KMeansResult lloyd(const Matrix& X, Matrix centroids, const KMeansOptions& options) {
  KMeansResult result;
  const Eigen::Index k_count = centroids.rows();
  Assignment current = assign(X, centroids);
  result.inertia_history.push_back(current.inertia);
  int iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    Matrix updated = Matrix::Zero(k_count, X.cols());
    std::vector<long> counts(static_cast<std::size_t>(k_count), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int k = current.labels[static_cast<std::size_t>(i)];
      updated.row(k) += X.row(i);
      ++counts[static_cast<std::size_t>(k)];
    }
    Vector sq_dist = current.sq_dist;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const long c = counts[static_cast<std::size_t>(k)];
      if (c > 0) {
        updated.row(k) /= static_cast<double>(c);
        continue;
      }
      Eigen::Index far = 0;
      sq_dist.maxCoeff(&far);
      updated.row(k) = X.row(far);
      sq_dist[far] = 0.0;
    }
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    current = assign(X, centroids);
    result.inertia_history.push_back(current.inertia);
    if (shift < options.tol) break;
  }
  result.centroids = std::move(centroids);
  result.labels = std::move(current.labels);
  result.inertia = current.inertia;
  result.iterations = iter;
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& X, const KMeansOptions& options) {
  if (options.clusters < 1) throw ConfigError("kmeans: K must be at least 1");
  if (options.n_init < 1) throw ConfigError("kmeans: n_init must be at least 1");
  if (X.rows() < options.clusters) {
    std::ostringstream msg;
    msg << "kmeans: " << X.rows() << " samples cannot form " << options.clusters << " clusters";
    throw ConfigError(msg.str());
  }
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  for (int run = 0; run < options.n_init; ++run) {
    Matrix seeds = seed_plus_plus(X, options.clusters, rng);
    KMeansResult r = lloyd(X, std::move(seeds), options);
    r.best_run = run;
    if (run == 0 || r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

DmmParams init_dmm_from_kmeans(const Matrix& centroids, const DissimilarityKind& kind,
                               double alpha) {
  return make_dmm_params(kind, alpha, centroids);
}

}  // namespace dmae
