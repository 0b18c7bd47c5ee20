#include "dmae/deepnet.hpp"

#include <cmath>
#include <sstream>

namespace dmae {

std::vector<int> MlpParams::dims() const {
  std::vector<int> out;
  if (layers.empty()) return out;
  out.push_back(static_cast<int>(layers.front().in_dim()));
  for (const auto& layer : layers) out.push_back(static_cast<int>(layer.out_dim()));
  return out;
}

Eigen::Index MlpParams::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
Eigen::Index MlpParams::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigError("mlp: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    require_dims(layer.bias.size() == layer.out_dim(), "mlp: bias length must match layer width");
    if (l > 0) {
      require_dims(layers[l - 1].out_dim() == layer.in_dim(),
                   "mlp: consecutive layer dimensions do not chain");
    }
  }
}

MlpParams make_mlp(const std::vector<int>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw ConfigError("mlp: need at least input and output widths");
  for (int d : dims) {
    if (d < 1) throw ConfigError("mlp: layer widths must be positive");
  }
  MlpParams mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const bool last = l + 2 == dims.size();
    DenseLayer layer;
    layer.activation = last ? Activation::Linear : Activation::Relu;
    const double limit = last ? std::sqrt(6.0 / (fan_in + fan_out)) : std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-limit, limit);
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(fan_out);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Matrix forward(const MlpParams& mlp, const Matrix& X, MlpCache* cache) {
  if (X.cols() != mlp.in_dim()) {
    std::ostringstream msg;
    msg << "mlp: input has " << X.cols() << " columns, first layer expects " << mlp.in_dim();
    throw DimensionMismatch(msg.str());
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  Matrix a = X;
  for (const auto& layer : mlp.layers) {
    Matrix pre = a * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    if (cache != nullptr) cache->inputs.push_back(std::move(a));
    a = layer.activation == Activation::Relu ? Matrix(pre.cwiseMax(0.0)) : pre;
    if (cache != nullptr) cache->preactivations.push_back(std::move(pre));
  }
  return a;
}

MlpGradients backward(const MlpParams& mlp, const MlpCache& cache, const Matrix& grad_output,
                      Matrix* grad_input) {
  require_dims(cache.inputs.size() == mlp.layers.size(), "mlp backward: stale cache");
  MlpGradients g;
  g.weight.resize(mlp.layers.size());
  g.bias.resize(mlp.layers.size());
  Matrix upstream = grad_output;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const auto& layer = mlp.layers[l];
    if (layer.activation == Activation::Relu) {
      upstream = upstream.cwiseProduct(
          (cache.preactivations[l].array() > 0.0).cast<double>().matrix());
    }
    g.weight[l] = upstream.transpose() * cache.inputs[l];
    g.bias[l] = upstream.colwise().sum().transpose();
    if (l > 0 || grad_input != nullptr) upstream = upstream * layer.weight;
  }
  if (grad_input != nullptr) *grad_input = std::move(upstream);
  return g;
}

double reconstruction_loss(const Matrix& X, const Matrix& X_tilde) {
  require_dims(X.rows() == X_tilde.rows() && X.cols() == X_tilde.cols(),
               "reconstruction_loss: shapes differ");
  return (X - X_tilde).squaredNorm();
}

void CompositeLossWeights::validate() const {
  if (reconstruction < 0.0 || clustering < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (reconstruction == 0.0 && clustering == 0.0) {
    throw ConfigError("lambda_r and lambda_c cannot both be zero");
  }
}

ComposedState composed_loss(const MlpParams& encoder, const DmmParams& dmm,
                            const MlpParams& decoder, const Matrix& X,
                            const ComposedOptions& options) {
  options.weights.validate();
  ComposedState st;
  st.options = options;
  st.x = X;
  const Matrix h = forward(encoder, X, &st.encoder);
  st.cluster = clustering_loss(dmm, h, options.clustering);
  const Matrix& dec_in =
      options.decoder_input == DecoderInput::ThetaTilde ? st.cluster.rec.theta_tilde : h;
  st.x_tilde = forward(decoder, dec_in, &st.decoder);
  require_dims(st.x_tilde.cols() == X.cols(), "composed_loss: decoder output width != input width");
  st.reconstruction = reconstruction_loss(X, st.x_tilde);
  st.clustering = st.cluster.loss;
  st.loss = options.weights.reconstruction * st.reconstruction +
            options.weights.clustering * st.clustering;
  return st;
}

ComposedGradients composed_backward(const MlpParams& encoder, const DmmParams& dmm,
                                    const MlpParams& decoder, const ComposedState& st) {
  ComposedGradients g;
  const Matrix g_xt = (2.0 * st.options.weights.reconstruction) * (st.x_tilde - st.x);
  Matrix g_dec_in;
  g.decoder = backward(decoder, st.decoder, g_xt, &g_dec_in);

  Matrix g_h;
  if (st.options.decoder_input == DecoderInput::ThetaTilde) {
    g.dmm = clustering_loss_backward(dmm, st.cluster, st.options.weights.clustering, &g_dec_in);
    g_h = g.dmm.h;
  } else {
    g.dmm = clustering_loss_backward(dmm, st.cluster, st.options.weights.clustering);
    g_h = g.dmm.h + g_dec_in;
  }
  g.encoder = backward(encoder, st.encoder, g_h);
  return g;
}

}  // namespace dmae
