#pragma once

#include "dmae/common.hpp"
#include "dmae/dissim.hpp"

#include <vector>

namespace dmae {

/// Parameters of a dissimilarity mixture model.
///
/// phi holds the reparameterized mixing coefficients log(pi_k * b_k). For
/// Mahalanobis, cov holds one lower-triangular factor L_k per cluster and the
/// quadratic form uses W_k = L_k L_k^T.
struct DmmParams {
  DissimilarityKind kind;
  double alpha = 1.0;
  Matrix theta;
  Vector phi;
  std::vector<Matrix> cov;

  Eigen::Index clusters() const { return theta.rows(); }
  Eigen::Index dim() const { return theta.cols(); }

  /// W_k = L_k L_k^T, or an empty vector when kind is not Mahalanobis.
  std::vector<Matrix> metrics() const;

  /// Throws DimensionMismatch / ConfigError on inconsistent shapes, K < 1 or alpha <= 0.
  void validate() const;
};

/// Theta = centers, Phi = 0, identity covariance factors for Mahalanobis.
DmmParams make_dmm_params(const DissimilarityKind& kind, double alpha, const Matrix& centers);

struct Reconstruction {
  Matrix theta_tilde;
  Vector phi_tilde;
};

/// Which factor multiplies d(h_i, theta~_i) in the clustering loss: alpha
/// (shallow lower bound) or 1 (the deep composed loss as usually written).
enum class LossScale { Alpha, Unit };

struct LossOptions {
  LossScale scale = LossScale::Alpha;
  /// Treat the assignments as constants during backpropagation.
  bool stop_gradient = false;
};

/// Soft assignments: row-wise softmax of (-alpha * d(h_i, theta_k) + phi_k).
Matrix encode(const DmmParams& params, const Matrix& H);

/// theta~ = S Theta, phi~ = S Phi.
Reconstruction decode(const DmmParams& params, const Matrix& S);

/// Hard labels: argmax_k of the assignment logits, ties to the lowest index.
Labels predict(const DmmParams& params, const Matrix& H);

/// Largest responsibility of each row.
Vector max_responsibility(const Matrix& S);

struct ClusteringState {
  Matrix h;
  Matrix dist;
  Matrix s;
  Reconstruction rec;
  std::vector<Matrix> metrics;
  std::vector<Matrix> metric_tilde;
  Vector per_sample;
  double loss = 0.0;
  LossOptions options;
};

/// Sum over samples of scale * d(h_i, theta~_i) - phi~_i, keeping the
/// forward state for clustering_loss_backward.
ClusteringState clustering_loss(const DmmParams& params, const Matrix& H,
                                LossOptions options = {});

struct DmmGradients {
  Matrix theta;
  Vector phi;
  std::vector<Matrix> cov;
  Matrix h;
};

/// Reverse pass of weight * clustering_loss. An optional upstream gradient on
/// theta~ (from a deep decoder) is folded in before the softmax backward pass.
DmmGradients clustering_loss_backward(const DmmParams& params, const ClusteringState& state,
                                      double weight = 1.0,
                                      const Matrix* theta_tilde_upstream = nullptr);

struct ProjectionOptions {
  /// Rescale each Cholesky factor to unit determinant after clamping.
  bool unit_det_metric = true;
};

inline constexpr double kMinCholeskyDiagonal = 1e-6;

/// Post-step constraints: Phi mean zero, Cholesky diagonals >= 1e-6,
/// positive descriptors for KL / Itakura-Saito.
void project(DmmParams& params, ProjectionOptions options = {});

}  // namespace dmae
