#include "dmae/gradsuite.hpp"

#include "dmae/deepnet.hpp"
#include "dmae/dissim.hpp"
#include "dmae/dmm.hpp"
#include "dmae/optim.hpp"

#include <algorithm>
#include <random>

namespace dmae {

namespace {

using Rng = std::mt19937_64;

const std::vector<DissimilarityTag> kAllTags = {
    DissimilarityTag::Euclidean,     DissimilarityTag::SquaredEuclidean,
    DissimilarityTag::Manhattan,     DissimilarityTag::NegDotProduct,
    DissimilarityTag::ItakuraSaito,  DissimilarityTag::KullbackLeibler,
    DissimilarityTag::Mahalanobis,   DissimilarityTag::PeriodicEuclidean,
};

DissimilarityKind kind_for(DissimilarityTag tag, Eigen::Index dim) {
  if (tag != DissimilarityTag::PeriodicEuclidean) return DissimilarityKind(tag);
  Vector period(dim);
  for (Eigen::Index j = 0; j < dim; ++j) period[j] = 1.0 + 0.5 * static_cast<double>(j % 3);
  return DissimilarityKind::periodic(period);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, const DissimilarityKind& kind,
                     Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> positive(0.5, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (kind.requires_positive()) {
        m(i, j) = positive(rng);
      } else if (kind.tag() == DissimilarityTag::PeriodicEuclidean) {
        m(i, j) = unit(rng) * kind.period_at(j);
      } else {
        m(i, j) = normal(rng);
      }
    }
  }
  return m;
}

Matrix random_factor(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 0.3);
  std::uniform_real_distribution<double> diag(0.5, 1.5);
  Matrix L = Matrix::Zero(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < r; ++c) L(r, c) = normal(rng);
    L(r, r) = diag(rng);
  }
  return L;
}

// Central differences straddle a kink when a coordinate lands too close to one.
bool near_kink(const DissimilarityKind& kind, const Vector& x, const Vector& center) {
  const Vector r = dissim::displacement(kind, x, center);
  switch (kind.tag()) {
    case DissimilarityTag::Manhattan:
      return (r.array().abs() < 1e-3).any();
    case DissimilarityTag::PeriodicEuclidean:
      for (Eigen::Index j = 0; j < r.size(); ++j) {
        if (std::abs(std::abs(r[j]) - 0.5 * kind.period_at(j)) < 1e-3) return true;
      }
      return r.norm() < 1e-3;
    case DissimilarityTag::Euclidean:
    case DissimilarityTag::Mahalanobis:
      return r.norm() < 1e-3;
    default:
      return false;
  }
}

void corrupt(std::vector<double>& analytic) {
  if (analytic.empty()) return;
  double norm = 0.0;
  for (double v : analytic) norm += v * v;
  analytic[0] += 0.1 * (std::sqrt(norm) + 1.0);
}

double check(const std::function<double(std::span<const double>)>& loss,
             const std::vector<double>& params, std::vector<double> analytic,
             const GradSuiteOptions& options) {
  if (options.inject_fault) corrupt(analytic);
  return grad_check(loss, params, analytic, options.epsilon).rel_error;
}

// Visits every trainable DMM coordinate in a fixed order; only the lower
// triangle of each covariance factor is a free parameter.
template <typename F>
void visit_dmm(Matrix& theta, Vector& phi, std::vector<Matrix>& cov, F&& f) {
  for (Eigen::Index i = 0; i < theta.size(); ++i) f(theta.data()[i]);
  for (Eigen::Index i = 0; i < phi.size(); ++i) f(phi.data()[i]);
  for (auto& L : cov) {
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      for (Eigen::Index c = 0; c <= r; ++c) f(L(r, c));
    }
  }
}

void collect_dmm(DmmParams& p, std::vector<double>& out) {
  visit_dmm(p.theta, p.phi, p.cov, [&](double& v) { out.push_back(v); });
}

void collect_dmm_grad(DmmGradients g, std::vector<double>& out) {
  visit_dmm(g.theta, g.phi, g.cov, [&](double& v) { out.push_back(v); });
}

std::size_t assign_dmm(DmmParams& p, std::span<const double> values, std::size_t at) {
  visit_dmm(p.theta, p.phi, p.cov, [&](double& v) { v = values[at++]; });
  return at;
}

template <typename F>
void visit_mlp(MlpParams& mlp, F&& f) {
  for (auto& layer : mlp.layers) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) f(layer.weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) f(layer.bias.data()[i]);
  }
}

void collect_mlp_grad(MlpGradients g, std::vector<double>& out) {
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    out.insert(out.end(), g.weight[l].data(), g.weight[l].data() + g.weight[l].size());
    out.insert(out.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
}

DmmParams random_dmm(const DissimilarityKind& kind, Eigen::Index clusters, Eigen::Index dim,
                     Rng& rng) {
  std::uniform_real_distribution<double> alpha(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 0.5);
  DmmParams p = make_dmm_params(kind, alpha(rng), random_matrix(clusters, dim, kind, rng));
  for (Eigen::Index k = 0; k < clusters; ++k) p.phi[k] = normal(rng);
  if (kind.needs_metric()) {
    for (auto& L : p.cov) L = random_factor(dim, rng);
  }
  return p;
}

bool dmm_near_kink(const DmmParams& p, const Matrix& H) {
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.clusters(); ++k) {
      if (near_kink(p.kind, H.row(i).transpose(), p.theta.row(k).transpose())) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<GradSuiteRow> gradcheck_dissim(const GradSuiteOptions& options) {
  std::vector<GradSuiteRow> rows;
  const Eigen::Index dim = 3;
  for (const auto tag : kAllTags) {
    const DissimilarityKind kind = kind_for(tag, dim);
    GradSuiteRow row{"dissim", kind.name(), options.instances, 0.0, kShallowGradTolerance};
    for (int s = 0; s < options.instances; ++s) {
      Rng rng(options.seed * 1000003ULL + static_cast<std::uint64_t>(tag) * 101 + s);
      Vector x;
      Vector c;
      do {
        x = random_matrix(1, dim, kind, rng).row(0).transpose();
        c = random_matrix(1, dim, kind, rng).row(0).transpose();
      } while (near_kink(kind, x, c));
      Matrix W;
      if (kind.needs_metric()) {
        const Matrix L = random_factor(dim, rng);
        W = L * L.transpose();
      }
      const Matrix* metric = kind.needs_metric() ? &W : nullptr;

      // Coordinates: x, then center, then W entries when present.
      std::vector<double> params(x.data(), x.data() + dim);
      params.insert(params.end(), c.data(), c.data() + dim);
      if (metric) params.insert(params.end(), W.data(), W.data() + W.size());
      auto loss = [&](std::span<const double> p) {
        const Vector xv = Eigen::Map<const Vector>(p.data(), dim);
        const Vector cv = Eigen::Map<const Vector>(p.data() + dim, dim);
        if (!metric) return dissim::eval(kind, xv, cv);
        Matrix Wv(dim, dim);
        std::copy(p.begin() + 2 * dim, p.end(), Wv.data());
        return dissim::eval(kind, xv, cv, &Wv);
      };
      const Vector gx = dissim::grad_x(kind, x, c, metric);
      const Vector gc = dissim::grad_theta(kind, x, c, metric);
      std::vector<double> analytic(gx.data(), gx.data() + dim);
      analytic.insert(analytic.end(), gc.data(), gc.data() + dim);
      if (metric) {
        const Matrix gw = dissim::grad_metric(kind, x, c, W);
        analytic.insert(analytic.end(), gw.data(), gw.data() + gw.size());
      }
      row.max_rel_error = std::max(row.max_rel_error, check(loss, params, analytic, options));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<GradSuiteRow> gradcheck_dmm(const GradSuiteOptions& options) {
  std::vector<GradSuiteRow> rows;
  const Eigen::Index n = 6;
  const Eigen::Index clusters = 3;
  const Eigen::Index dim = 3;
  for (const auto tag : kAllTags) {
    const DissimilarityKind kind = kind_for(tag, dim);
    GradSuiteRow row{"dmm", kind.name(), options.instances, 0.0, kShallowGradTolerance};
    for (int s = 0; s < options.instances; ++s) {
      Rng rng(options.seed * 1000003ULL + 7919 + static_cast<std::uint64_t>(tag) * 101 + s);
      DmmParams params;
      Matrix H;
      do {
        params = random_dmm(kind, clusters, dim, rng);
        H = random_matrix(n, dim, kind, rng);
      } while (dmm_near_kink(params, H));
      // Alternate the two loss scalings across instances.
      const LossOptions lopts{s % 2 == 0 ? LossScale::Alpha : LossScale::Unit, false};

      std::vector<double> flat_params;
      collect_dmm(params, flat_params);
      flat_params.insert(flat_params.end(), H.data(), H.data() + H.size());
      auto loss = [&](std::span<const double> p) {
        DmmParams q = params;
        const std::size_t at = assign_dmm(q, p, 0);
        Matrix Hq(n, dim);
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(at), p.end(), Hq.data());
        return clustering_loss(q, Hq, lopts).loss;
      };
      const ClusteringState st = clustering_loss(params, H, lopts);
      const DmmGradients g = clustering_loss_backward(params, st);
      std::vector<double> analytic;
      collect_dmm_grad(g, analytic);
      analytic.insert(analytic.end(), g.h.data(), g.h.data() + g.h.size());
      row.max_rel_error = std::max(row.max_rel_error, check(loss, flat_params, analytic, options));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<GradSuiteRow> gradcheck_deepnet(const GradSuiteOptions& options) {
  std::vector<GradSuiteRow> rows;
  const Eigen::Index n = 5;
  const Eigen::Index clusters = 3;
  const std::vector<int> enc_dims = {3, 6, 2};
  const std::vector<int> dec_dims = {2, 6, 3};
  const std::vector<DissimilarityTag> tags = {
      DissimilarityTag::Euclidean, DissimilarityTag::SquaredEuclidean,
      DissimilarityTag::Manhattan, DissimilarityTag::NegDotProduct,
      DissimilarityTag::Mahalanobis, DissimilarityTag::PeriodicEuclidean,
  };
  for (const auto wiring : {DecoderInput::ThetaTilde, DecoderInput::Latent}) {
    for (const auto tag : tags) {
      DissimilarityKind kind = kind_for(tag, 2);
      if (tag == DissimilarityTag::PeriodicEuclidean) kind = DissimilarityKind::periodic(Vector::Constant(1, 4.0));
      const std::string name =
          kind.name() + (wiring == DecoderInput::ThetaTilde ? "/theta_tilde" : "/latent");
      GradSuiteRow row{"deepnet", name, options.instances, 0.0, kDeepGradTolerance};
      for (int s = 0; s < options.instances; ++s) {
        Rng rng(options.seed * 1000003ULL + 15485863 + static_cast<std::uint64_t>(tag) * 101 +
                static_cast<std::uint64_t>(wiring) * 53 + s);
        std::normal_distribution<double> normal(0.0, 1.0);
        MlpParams enc = make_mlp(enc_dims, rng);
        MlpParams dec = make_mlp(dec_dims, rng);
        // Non-zero biases so no relu sits exactly at its kink.
        visit_mlp(enc, [&](double& v) { if (v == 0.0) v = 0.1 * normal(rng); });
        visit_mlp(dec, [&](double& v) { if (v == 0.0) v = 0.1 * normal(rng); });
        Matrix X(n, enc_dims.front());
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
        DmmParams dmm;
        do {
          dmm = random_dmm(kind, clusters, 2, rng);
        } while (dmm_near_kink(dmm, forward(enc, X)));

        ComposedOptions copts;
        copts.weights = {1.0, 0.7};
        copts.decoder_input = wiring;
        copts.clustering.scale = s % 2 == 0 ? LossScale::Unit : LossScale::Alpha;

        std::vector<double> flat_params;
        visit_mlp(enc, [&](double& v) { flat_params.push_back(v); });
        collect_dmm(dmm, flat_params);
        visit_mlp(dec, [&](double& v) { flat_params.push_back(v); });
        auto loss = [&](std::span<const double> p) {
          MlpParams e = enc;
          MlpParams d = dec;
          DmmParams q = dmm;
          std::size_t at = 0;
          visit_mlp(e, [&](double& v) { v = p[at++]; });
          at = assign_dmm(q, p, at);
          visit_mlp(d, [&](double& v) { v = p[at++]; });
          return composed_loss(e, q, d, X, copts).loss;
        };
        const ComposedState st = composed_loss(enc, dmm, dec, X, copts);
        const ComposedGradients g = composed_backward(enc, dmm, dec, st);
        std::vector<double> analytic;
        collect_mlp_grad(g.encoder, analytic);
        collect_dmm_grad(g.dmm, analytic);
        collect_mlp_grad(g.decoder, analytic);
        row.max_rel_error =
            std::max(row.max_rel_error, check(loss, flat_params, analytic, options));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace dmae
