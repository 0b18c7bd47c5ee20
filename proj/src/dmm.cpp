#include "dmae/dmm.hpp"

#include <cmath>
#include <sstream>

namespace dmae {

std::vector<Matrix> DmmParams::metrics() const {
  std::vector<Matrix> out;
  if (!kind.needs_metric()) return out;
  out.reserve(cov.size());
  for (const auto& factor : cov) out.push_back(factor * factor.transpose());
  return out;
}

void DmmParams::validate() const {
  if (theta.rows() < 1) throw ConfigError("dmm: at least one cluster is required");
  if (!(alpha > 0.0)) throw ConfigError("dmm: alpha must be positive");
  require_dims(phi.size() == theta.rows(), "dmm: phi length must equal number of clusters");
  if (kind.needs_metric()) {
    require_dims(static_cast<Eigen::Index>(cov.size()) == theta.rows(),
                 "dmm: one covariance factor per cluster required");
    for (const auto& factor : cov) {
      require_dims(factor.rows() == dim() && factor.cols() == dim(),
                   "dmm: covariance factor must be m x m");
    }
  } else {
    require_dims(cov.empty(), "dmm: covariance factors only apply to mahalanobis");
  }
}

DmmParams make_dmm_params(const DissimilarityKind& kind, double alpha, const Matrix& centers) {
  DmmParams params;
  params.kind = kind;
  params.alpha = alpha;
  params.theta = centers;
  params.phi = Vector::Zero(centers.rows());
  if (kind.needs_metric()) {
    params.cov.assign(centers.rows(), Matrix::Identity(centers.cols(), centers.cols()));
  }
  params.validate();
  return params;
}

namespace {

Matrix logits(const DmmParams& params, const Matrix& dist) {
  Matrix z = -params.alpha * dist;
  z.rowwise() += params.phi.transpose();
  return z;
}

Matrix softmax_rows(const Matrix& z) {
  Matrix s(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double top = z.row(i).maxCoeff();
    s.row(i) = (z.row(i).array() - top).exp();
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

void check_input(const DmmParams& params, const Matrix& H) {
  params.validate();
  if (H.cols() != params.dim()) {
    std::ostringstream msg;
    msg << "dmm: input has " << H.cols() << " columns, model expects " << params.dim();
    throw DimensionMismatch(msg.str());
  }
}

}  // namespace

Matrix encode(const DmmParams& params, const Matrix& H) {
  check_input(params, H);
  const Matrix dist = dissim::pairwise(params.kind, H, params.theta, params.metrics());
  return softmax_rows(logits(params, dist));
}

Reconstruction decode(const DmmParams& params, const Matrix& S) {
  require_dims(S.cols() == params.clusters(), "decode: assignment width must equal K");
  return {S * params.theta, S * params.phi};
}

Labels predict(const DmmParams& params, const Matrix& H) {
  check_input(params, H);
  const Matrix z = logits(params, dissim::pairwise(params.kind, H, params.theta, params.metrics()));
  Labels labels(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < z.cols(); ++k) {
      if (z(i, k) > z(i, best)) best = k;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

Vector max_responsibility(const Matrix& S) { return S.rowwise().maxCoeff(); }

ClusteringState clustering_loss(const DmmParams& params, const Matrix& H, LossOptions options) {
  check_input(params, H);
  ClusteringState st;
  st.options = options;
  st.h = H;
  st.metrics = params.metrics();
  st.dist = dissim::pairwise(params.kind, H, params.theta, st.metrics);
  st.s = softmax_rows(logits(params, st.dist));
  st.rec = decode(params, st.s);

  const double scale = options.scale == LossScale::Alpha ? params.alpha : 1.0;
  const bool mahalanobis = params.kind.needs_metric();
  st.per_sample.resize(H.rows());
  if (mahalanobis) st.metric_tilde.resize(static_cast<std::size_t>(H.rows()));
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    const Matrix* metric = nullptr;
    if (mahalanobis) {
      Matrix blended = Matrix::Zero(params.dim(), params.dim());
      for (Eigen::Index k = 0; k < params.clusters(); ++k) blended += st.s(i, k) * st.metrics[k];
      st.metric_tilde[i] = std::move(blended);
      metric = &st.metric_tilde[i];
    }
    const double d = dissim::eval(params.kind, H.row(i).transpose(),
                                  st.rec.theta_tilde.row(i).transpose(), metric);
    st.per_sample[i] = scale * d - st.rec.phi_tilde[i];
  }
  st.loss = st.per_sample.sum();
  return st;
}

DmmGradients clustering_loss_backward(const DmmParams& params, const ClusteringState& st,
                                      double weight, const Matrix* theta_tilde_upstream) {
  const Eigen::Index n = st.h.rows();
  const Eigen::Index k_count = params.clusters();
  const Eigen::Index m = params.dim();
  if (theta_tilde_upstream != nullptr) {
    require_dims(theta_tilde_upstream->rows() == n && theta_tilde_upstream->cols() == m,
                 "clustering backward: upstream gradient must be N x m");
  }
  const bool mahalanobis = params.kind.needs_metric();
  const double scale = st.options.scale == LossScale::Alpha ? params.alpha : 1.0;
  const double w = weight * scale;

  DmmGradients g;
  g.theta = Matrix::Zero(k_count, m);
  g.phi = Vector::Zero(k_count);
  g.h = Matrix::Zero(n, m);
  std::vector<Matrix> g_metric;
  if (mahalanobis) g_metric.assign(static_cast<std::size_t>(k_count), Matrix::Zero(m, m));

  Vector g_s(k_count);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector h = st.h.row(i).transpose();
    const Vector tt = st.rec.theta_tilde.row(i).transpose();
    const Matrix* mt = mahalanobis ? &st.metric_tilde[i] : nullptr;

    Vector g_tt = Vector::Zero(m);
    if (w != 0.0) {
      g_tt = w * dissim::grad_theta(params.kind, h, tt, mt);
      g.h.row(i) = w * dissim::grad_x(params.kind, h, tt, mt).transpose();
    }
    if (theta_tilde_upstream != nullptr) g_tt += theta_tilde_upstream->row(i).transpose();
    Matrix g_mt;
    if (mahalanobis) {
      g_mt = w != 0.0 ? Matrix(w * dissim::grad_metric(params.kind, h, tt, *mt))
                      : Matrix(Matrix::Zero(m, m));
    }

    // Through the convex combination with the assignments held fixed.
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double s = st.s(i, k);
      g.theta.row(k) += s * g_tt.transpose();
      g.phi[k] -= weight * s;
      if (mahalanobis) g_metric[k] += s * g_mt;
    }
    if (st.options.stop_gradient) continue;

    // Through the assignments: theta~ and phi~ depend on s, s on the logits.
    for (Eigen::Index k = 0; k < k_count; ++k) {
      double v = params.theta.row(k).dot(g_tt) - weight * params.phi[k];
      if (mahalanobis) v += (g_mt.array() * st.metrics[k].array()).sum();
      g_s[k] = v;
    }
    const double mean = st.s.row(i).dot(g_s);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double g_z = st.s(i, k) * (g_s[k] - mean);
      if (g_z == 0.0) continue;
      g.phi[k] += g_z;
      const double g_d = -params.alpha * g_z;
      const Vector center = params.theta.row(k).transpose();
      const Matrix* metric = mahalanobis ? &st.metrics[k] : nullptr;
      g.theta.row(k) += g_d * dissim::grad_theta(params.kind, h, center, metric).transpose();
      g.h.row(i) += g_d * dissim::grad_x(params.kind, h, center, metric).transpose();
      if (mahalanobis) g_metric[k] += g_d * dissim::grad_metric(params.kind, h, center, *metric);
    }
  }

  if (mahalanobis) {
    g.cov.reserve(static_cast<std::size_t>(k_count));
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const Matrix& gw = g_metric[k];
      Matrix gl = (gw + gw.transpose()) * params.cov[k];
      g.cov.push_back(gl.triangularView<Eigen::Lower>());
    }
  }
  return g;
}

void project(DmmParams& params, ProjectionOptions options) {
  params.phi.array() -= params.phi.mean();
  if (params.kind.needs_metric()) {
    const double m = static_cast<double>(params.dim());
    for (auto& factor : params.cov) {
      factor = Matrix(factor.triangularView<Eigen::Lower>());
      for (Eigen::Index j = 0; j < factor.rows(); ++j) {
        factor(j, j) = std::max(factor(j, j), kMinCholeskyDiagonal);
      }
      if (options.unit_det_metric) {
        const double log_det = factor.diagonal().array().log().sum();
        factor *= std::exp(-log_det / m);
      }
    }
  }
  if (params.kind.tag() == DissimilarityTag::ItakuraSaito ||
      params.kind.tag() == DissimilarityTag::KullbackLeibler) {
    params.theta = params.theta.cwiseMax(dissim::kPositiveFloor);
  }
  if (params.kind.tag() == DissimilarityTag::KullbackLeibler) {
    for (Eigen::Index k = 0; k < params.clusters(); ++k) {
      params.theta.row(k) /= params.theta.row(k).sum();
    }
  }
}

}  // namespace dmae
