#pragma once

#include <vector>

#include "mml/losses.hpp"
#include "mml/matrix.hpp"
#include "mml/rng.hpp"

namespace mml {

struct MlpLayer {
  Matrix W;               // in x out
  std::vector<double> b;  // out
};

// One perceptron per modality: ReLU hidden layers, softmax on the last layer.
struct Mlp {
  std::vector<MlpLayer> layers;

  // dims = {input, hidden..., classes}; weights and biases uniform in
  // +-1/sqrt(fan_in)
  static Mlp init(const std::vector<int>& dims, Rng& rng);

  int input_dim() const { return static_cast<int>(layers.front().W.rows()); }
  int output_dim() const { return static_cast<int>(layers.back().W.cols()); }
};

struct MlpStack {
  std::vector<Mlp> nets;
};

struct MlpCache {
  // per modality: inputs to each layer (activations[0] = batch features),
  // plus the final probability rows
  std::vector<std::vector<Matrix>> activations;
  std::vector<Matrix> outputs;
};

// Per-modality probability rows (softmax head applied).
ModalityOutputs mlp_forward(const MlpStack& stack, const std::vector<Matrix>& batch,
                            MlpCache* cache = nullptr);

using MlpGrads = std::vector<std::vector<MlpLayer>>;  // [modality][layer]

// Backprop d_outputs (gradients w.r.t. the softmax outputs) through the
// softmax head and every layer. Returns weight/bias gradients shaped like the
// stack; also accumulates nothing into the stack itself.
MlpGrads mlp_backward(const MlpStack& stack, const MlpCache& cache,
                      const ModalityOutputs& d_outputs);

}  // namespace mml
