#include "dmae/config.hpp"
#include "dmae/data.hpp"
#include "dmae/deepnet.hpp"
#include "dmae/optim.hpp"
#include "dmae/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dmae;
using dmae::test::mat;

namespace {

// Loop-based forward pass used as an oracle for the Eigen implementation.
Matrix reference_forward(const MlpParams& mlp, const Matrix& X) {
  Matrix a = X;
  for (const auto& layer : mlp.layers) {
    Matrix out(a.rows(), layer.out_dim());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index o = 0; o < layer.out_dim(); ++o) {
        double z = layer.bias[o];
        for (Eigen::Index j = 0; j < layer.in_dim(); ++j) z += layer.weight(o, j) * a(i, j);
        out(i, o) = layer.activation == Activation::Relu && z < 0.0 ? 0.0 : z;
      }
    }
    a = out;
  }
  return a;
}

// Composed loss with theta~ wiring, Euclidean dissimilarity and unit scale,
// written without the library's clustering routines.
double reference_composed(const MlpParams& enc, const DmmParams& dmm, const MlpParams& dec,
                          const Matrix& X, double lr, double lc) {
  const Matrix H = reference_forward(enc, X);
  const auto K = dmm.clusters();
  Matrix tt(H.rows(), H.cols());
  double clustering = 0.0;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    std::vector<double> z(static_cast<std::size_t>(K));
    double top = -1e300;
    for (Eigen::Index k = 0; k < K; ++k) {
      double d2 = 0.0;
      for (Eigen::Index j = 0; j < H.cols(); ++j) {
        d2 += (H(i, j) - dmm.theta(k, j)) * (H(i, j) - dmm.theta(k, j));
      }
      z[static_cast<std::size_t>(k)] = -dmm.alpha * std::sqrt(d2) + dmm.phi[k];
      top = std::max(top, z[static_cast<std::size_t>(k)]);
    }
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - top);
    double pt = 0.0;
    for (Eigen::Index j = 0; j < H.cols(); ++j) tt(i, j) = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double s = std::exp(z[static_cast<std::size_t>(k)] - top) / denom;
      for (Eigen::Index j = 0; j < H.cols(); ++j) tt(i, j) += s * dmm.theta(k, j);
      pt += s * dmm.phi[k];
    }
    double d2 = 0.0;
    for (Eigen::Index j = 0; j < H.cols(); ++j) d2 += (H(i, j) - tt(i, j)) * (H(i, j) - tt(i, j));
    clustering += std::sqrt(d2) - pt;
  }
  const Matrix Xt = reference_forward(dec, tt);
  double rec = 0.0;
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    rec += (X.data()[i] - Xt.data()[i]) * (X.data()[i] - Xt.data()[i]);
  }
  return lr * rec + lc * clustering;
}

MlpParams identity_mlp(Eigen::Index dim) {
  MlpParams mlp;
  DenseLayer layer;
  layer.weight = Matrix::Identity(dim, dim);
  layer.bias = Vector::Zero(dim);
  layer.activation = Activation::Linear;
  mlp.layers.push_back(layer);
  return mlp;
}

void randomize_biases(MlpParams& mlp, std::mt19937_64& rng) {
  for (auto& layer : mlp.layers) layer.bias = test::randn(layer.out_dim(), 1, rng, 0.1);
}

std::vector<double> pack(const MlpParams& mlp) {
  std::vector<double> out;
  for (const auto& l : mlp.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

std::vector<double> pack(const MlpGradients& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    out.insert(out.end(), g.weight[l].data(), g.weight[l].data() + g.weight[l].size());
    out.insert(out.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
  return out;
}

MlpParams unpack(MlpParams mlp, std::span<const double> v) {
  std::size_t at = 0;
  for (auto& l : mlp.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = v[at++];
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias.data()[i] = v[at++];
  }
  return mlp;
}

}  // namespace

TEST_SUITE("deepnet") {

TEST_CASE("make_mlp: relu hidden layers, linear output, chained shapes") {
  std::mt19937_64 rng(1);
  const MlpParams mlp = make_mlp({2, 256, 256, 100}, rng);
  CHECK(mlp.dims() == std::vector<int>{2, 256, 256, 100});
  CHECK(mlp.layers[0].activation == Activation::Relu);
  CHECK(mlp.layers[1].activation == Activation::Relu);
  CHECK(mlp.layers[2].activation == Activation::Linear);
  CHECK(mlp.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 2));
  CHECK(mlp.layers[2].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 356));
  CHECK(mlp.layers[1].bias.isZero(0.0));
  CHECK_THROWS_AS(make_mlp({3}, rng), ConfigError);
  CHECK_THROWS_AS(make_mlp({3, 0, 2}, rng), ConfigError);
}

TEST_CASE("forward: zero network, identity network, loop oracle") {
  std::mt19937_64 rng(2);
  MlpParams zero = make_mlp({3, 4, 2}, rng);
  for (auto& l : zero.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(forward_encoder(zero, test::randn(5, 3, rng)).isZero(0.0));
  const Matrix X = test::randn(6, 3, rng);
  CHECK(forward_encoder(identity_mlp(3), X) == X);
  CHECK(forward_decoder(identity_mlp(3), X) == X);

  for (int rep = 0; rep < 5; ++rep) {
    MlpParams enc = make_mlp({3, 7, 2}, rng);
    randomize_biases(enc, rng);
    const Matrix In = test::randn(9, 3, rng);
    CHECK((forward_encoder(enc, In) - reference_forward(enc, In)).cwiseAbs().maxCoeff() <= 1e-12);
    MlpParams dec = make_mlp({2, 7, 3}, rng);
    randomize_biases(dec, rng);
    const Matrix Z = test::randn(9, 2, rng);
    CHECK((forward_decoder(dec, Z) - reference_forward(dec, Z)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(forward(identity_mlp(3), test::randn(2, 4, rng)), DimensionMismatch);
}

TEST_CASE("reconstruction loss") {
  CHECK(reconstruction_loss(mat(2, 2, {1, 2, 3, 4}), mat(2, 2, {1, 2, 3, 4})) == 0.0);
  CHECK(reconstruction_loss(mat(1, 2, {0, 0}), mat(1, 2, {3, 4})) == 25.0);
  CHECK_THROWS_AS(reconstruction_loss(mat(1, 2, {0, 0}), mat(2, 1, {0, 0})), DimensionMismatch);
  // Dyadic values keep every partial sum exact, so the partition identity is exact.
  std::mt19937_64 rng(3);
  Matrix X = (test::randn(8, 3, rng) * 64).array().round() / 64;
  Matrix Y = (test::randn(8, 3, rng) * 64).array().round() / 64;
  CHECK(reconstruction_loss(X, Y) ==
        reconstruction_loss(X.topRows(5), Y.topRows(5)) +
            reconstruction_loss(X.bottomRows(3), Y.bottomRows(3)));
}

TEST_CASE("loss weights") {
  CHECK_THROWS_AS((CompositeLossWeights{0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((CompositeLossWeights{-1.0, 1.0}.validate()), ConfigError);
  CHECK_NOTHROW((CompositeLossWeights{0.0, 1.0}.validate()));
}

TEST_CASE("composed loss: degenerate pipelines") {
  std::mt19937_64 rng(4);
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  const MlpParams enc = make_mlp({3, 6, 2}, rng);
  const MlpParams dec = make_mlp({2, 6, 3}, rng);
  DmmParams dmm = make_dmm_params(euclid, 1.5, test::randn(2, 2, rng));
  dmm.phi = test::randn(2, 1, rng);
  const Matrix X = test::randn(7, 3, rng);

  SUBCASE("lambda_c = 0 with the latent wired to the decoder is plain autoencoding") {
    ComposedOptions opts;
    opts.weights = {1.0, 0.0};
    opts.decoder_input = DecoderInput::Latent;
    const ComposedState st = composed_loss(enc, dmm, dec, X, opts);
    CHECK(st.loss == reconstruction_loss(X, forward(dec, forward(enc, X))));
    const ComposedGradients g = composed_backward(enc, dmm, dec, st);
    CHECK(g.dmm.theta.isZero(0.0));
    CHECK(g.dmm.phi.isZero(0.0));
  }
  SUBCASE("lambda_c = 0 with theta~ wiring reconstructs from theta~") {
    ComposedOptions opts;
    opts.weights = {1.0, 0.0};
    const ComposedState st = composed_loss(enc, dmm, dec, X, opts);
    const Matrix tt = decode(dmm, encode(dmm, forward(enc, X))).theta_tilde;
    CHECK(st.loss == doctest::Approx(reconstruction_loss(X, forward(dec, tt))).epsilon(1e-14));
  }
  SUBCASE("lambda_r = 0 with identity networks is the clustering loss on X") {
    ComposedOptions opts;
    opts.weights = {0.0, 1.0};
    DmmParams d3 = make_dmm_params(euclid, 1.5, test::randn(2, 3, rng));
    const ComposedState st = composed_loss(identity_mlp(3), d3, identity_mlp(3), X, opts);
    CHECK(st.loss == doctest::Approx(clustering_loss(d3, X, {LossScale::Unit, false}).loss)
                         .epsilon(1e-14));
  }
}

TEST_CASE("composed loss matches an independent implementation") {
  std::mt19937_64 rng(5);
  const DissimilarityKind euclid(DissimilarityTag::Euclidean);
  for (int rep = 0; rep < 10; ++rep) {
    MlpParams enc = make_mlp({3, 5, 2}, rng);
    MlpParams dec = make_mlp({2, 5, 3}, rng);
    randomize_biases(enc, rng);
    randomize_biases(dec, rng);
    DmmParams dmm = make_dmm_params(euclid, 0.5 + rep, test::randn(3, 2, rng));
    dmm.phi = test::randn(3, 1, rng);
    const Matrix X = test::randn(6, 3, rng);
    ComposedOptions opts;
    opts.weights = {0.8, 0.3};
    const double value = composed_loss(enc, dmm, dec, X, opts).loss;
    CHECK(std::abs(value - reference_composed(enc, dmm, dec, X, 0.8, 0.3)) <= 1e-10);
  }
}

TEST_CASE("composed backward: finite differences on N=4, dims 3-5-2, K=2") {
  std::mt19937_64 rng(6);
  for (const auto wiring : {DecoderInput::ThetaTilde, DecoderInput::Latent}) {
    for (int rep = 0; rep < 5; ++rep) {
      MlpParams enc = make_mlp({3, 5, 2}, rng);
      MlpParams dec = make_mlp({2, 5, 3}, rng);
      randomize_biases(enc, rng);
      randomize_biases(dec, rng);
      DmmParams dmm = make_dmm_params(DissimilarityKind(DissimilarityTag::Euclidean), 1.0,
                                      test::randn(2, 2, rng));
      const Matrix X = test::randn(4, 3, rng);
      ComposedOptions opts;
      opts.weights = {1.0, 0.5};
      opts.decoder_input = wiring;
      const ComposedGradients g = composed_backward(enc, dmm, dec, composed_loss(enc, dmm, dec, X, opts));

      auto f_enc = [&](std::span<const double> v) {
        return composed_loss(unpack(enc, v), dmm, dec, X, opts).loss;
      };
      CHECK(grad_check(f_enc, pack(enc), pack(g.encoder)).rel_error <= 1e-4);
      auto f_dec = [&](std::span<const double> v) {
        return composed_loss(enc, dmm, unpack(dec, v), X, opts).loss;
      };
      CHECK(grad_check(f_dec, pack(dec), pack(g.decoder)).rel_error <= 1e-4);
      std::vector<double> theta(dmm.theta.data(), dmm.theta.data() + dmm.theta.size());
      auto f_theta = [&](std::span<const double> v) {
        DmmParams q = dmm;
        std::copy(v.begin(), v.end(), q.theta.data());
        return composed_loss(enc, q, dec, X, opts).loss;
      };
      CHECK(grad_check(f_theta, theta, flat(g.dmm.theta)).rel_error <= 1e-4);
    }
  }
}

TEST_CASE("every parameter receives gradient when both weights are positive") {
  std::mt19937_64 rng(7);
  MlpParams enc = make_mlp({3, 8, 2}, rng);
  MlpParams dec = make_mlp({2, 8, 3}, rng);
  randomize_biases(enc, rng);
  randomize_biases(dec, rng);
  DmmParams dmm = make_dmm_params(DissimilarityKind(DissimilarityTag::Mahalanobis), 1.0,
                                  test::randn(3, 2, rng));
  dmm.phi = test::randn(3, 1, rng);
  const Matrix X = test::randn(20, 3, rng);
  const ComposedGradients g = composed_backward(enc, dmm, dec, composed_loss(enc, dmm, dec, X, {}));
  for (const auto& w : g.encoder.weight) CHECK(w.norm() > 0.0);
  for (const auto& w : g.decoder.weight) CHECK(w.norm() > 0.0);
  CHECK(g.dmm.theta.norm() > 0.0);
  CHECK(g.dmm.phi.norm() > 0.0);
  for (const auto& c : g.dmm.cov) CHECK(c.norm() > 0.0);
}

TEST_CASE("a dead relu unit gets no incoming gradient") {
  std::mt19937_64 rng(8);
  MlpParams mlp = make_mlp({3, 4, 2}, rng);
  mlp.layers[0].weight.row(2).setZero();
  mlp.layers[0].bias[2] = -1.0;
  MlpCache cache;
  const Matrix X = test::randn(10, 3, rng);
  const Matrix out = forward(mlp, X, &cache);
  const MlpGradients g = backward(mlp, cache, Matrix::Ones(out.rows(), out.cols()));
  CHECK(g.weight[0].row(2).isZero(0.0));
  CHECK(g.bias[0][2] == 0.0);
  CHECK(g.weight[1].col(2).isZero(0.0));
}

TEST_CASE("forward and backward are deterministic") {
  std::mt19937_64 rng(9);
  const MlpParams enc = make_mlp({3, 6, 2}, rng);
  const MlpParams dec = make_mlp({2, 6, 3}, rng);
  const DmmParams dmm = make_dmm_params(DissimilarityKind(DissimilarityTag::Euclidean), 2.0,
                                        test::randn(2, 2, rng));
  const Matrix X = test::randn(11, 3, rng);
  const ComposedState a = composed_loss(enc, dmm, dec, X, {});
  const ComposedState b = composed_loss(enc, dmm, dec, X, {});
  CHECK(a.loss == b.loss);
  const ComposedGradients ga = composed_backward(enc, dmm, dec, a);
  const ComposedGradients gb = composed_backward(enc, dmm, dec, b);
  CHECK(pack(ga.encoder) == pack(gb.encoder));
  CHECK(ga.dmm.theta == gb.dmm.theta);
}

TEST_CASE("pretraining the 2-256-256-100-256-256-2 autoencoder lowers the reconstruction loss") {
  ExperimentConfig cfg;
  cfg.encoder_dims = {2, 256, 256, 100};
  cfg.decoder_dims = {100, 256, 256, 2};
  cfg.pretrain_epochs = 20;
  cfg.pretrain_lr = 1e-3;
  for (const auto& data : {gen_moons(1000, 0.1, 0), gen_circles(1000, 0.1, 0.1, 0)}) {
    const Autoencoder ae = pretrain_autoencoder(cfg, data.x, 3);
    const auto& L = ae.epoch_losses;
    REQUIRE(L.size() == 20);
    double first = 0.0;
    double last = 0.0;
    for (int e = 0; e < 5; ++e) {
      first += L[static_cast<std::size_t>(e)];
      last += L[L.size() - 1 - static_cast<std::size_t>(e)];
    }
    CHECK_MESSAGE(last < 0.5 * first, data.name);
    // Adam at this rate has a noisy floor once the fit is good, so the trend is
    // checked on 5-epoch windows: none climbs back to the first window.
    for (std::size_t e = 5; e + 5 <= L.size(); e += 5) {
      double cur = 0.0;
      for (std::size_t j = 0; j < 5; ++j) cur += L[e + j];
      CHECK_MESSAGE(cur < 0.1 * first, data.name);
    }
  }
}

}  // TEST_SUITE
