#pragma once

#include "dmae/common.hpp"
#include "dmae/dmm.hpp"

#include <random>
#include <vector>

namespace dmae {

enum class Activation { Relu, Linear };

/// y = activation(W x + b) with W stored out x in.
struct DenseLayer {
  Matrix weight;
  Vector bias;
  Activation activation = Activation::Linear;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// A fully-connected network: relu hidden layers, linear output layer.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Layer widths including the input, e.g. {2, 256, 256, 100}.
  std::vector<int> dims() const;
  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  void validate() const;
};

/// He-uniform weights for relu layers, Xavier-uniform for the linear output,
/// zero biases.
MlpParams make_mlp(const std::vector<int>& dims, std::mt19937_64& rng);

struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
};

struct MlpGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
};

Matrix forward(const MlpParams& mlp, const Matrix& X, MlpCache* cache = nullptr);

inline Matrix forward_encoder(const MlpParams& encoder, const Matrix& X,
                              MlpCache* cache = nullptr) {
  return forward(encoder, X, cache);
}

/// The decoder input is the reconstructed descriptor theta~ in the full model.
inline Matrix forward_decoder(const MlpParams& decoder, const Matrix& H_tilde,
                              MlpCache* cache = nullptr) {
  return forward(decoder, H_tilde, cache);
}

/// Reverse pass; writes d(loss)/d(input) to grad_input when non-null.
MlpGradients backward(const MlpParams& mlp, const MlpCache& cache, const Matrix& grad_output,
                      Matrix* grad_input = nullptr);

/// Sum over samples of ||x_i - x~_i||^2.
double reconstruction_loss(const Matrix& X, const Matrix& X_tilde);

struct CompositeLossWeights {
  double reconstruction = 1.0;
  double clustering = 1.0;

  void validate() const;
};

/// What the deep decoder consumes: the DM-Decoder output theta~_i, or the
/// latent code h_i itself (plain autoencoder wiring).
enum class DecoderInput { ThetaTilde, Latent };

struct ComposedOptions {
  CompositeLossWeights weights;
  LossOptions clustering{LossScale::Unit, false};
  DecoderInput decoder_input = DecoderInput::ThetaTilde;
};

struct ComposedState {
  double loss = 0.0;
  double reconstruction = 0.0;
  double clustering = 0.0;
  Matrix x;
  Matrix x_tilde;
  MlpCache encoder;
  MlpCache decoder;
  ClusteringState cluster;
  ComposedOptions options;
};

/// lambda_r * L_r + lambda_c * L_c over the deep encoder, DM-Encoder,
/// DM-Decoder and deep decoder.
ComposedState composed_loss(const MlpParams& encoder, const DmmParams& dmm,
                            const MlpParams& decoder, const Matrix& X,
                            const ComposedOptions& options);

struct ComposedGradients {
  MlpGradients encoder;
  MlpGradients decoder;
  DmmGradients dmm;
};

ComposedGradients composed_backward(const MlpParams& encoder, const DmmParams& dmm,
                                    const MlpParams& decoder, const ComposedState& state);

}  // namespace dmae
