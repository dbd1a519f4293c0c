#pragma once

#include <cstdint>
#include <vector>

#include "mml/matrix.hpp"
#include "mml/rng.hpp"

namespace mml {

// One [batch x classes] probability matrix per modality. The loss accepts any
// finite values here (proxies are unconstrained, so nothing may assume simplex
// rows), but model softmax heads produce proper probability rows.
using ModalityOutputs = std::vector<Matrix>;

// Trainable proxy tensor w_c^{k,m}, logically [classes x proxies x modalities
// x classes]. Stored as one (C*K) x C matrix per modality with row c*K + k
// holding the C-dim proxy k of class c, so similarity is a plain matmul.
struct ProxyBank {
  int classes = 0;
  int proxies = 0;
  int modalities = 0;
  double gamma = 0.1;
  std::vector<Matrix> w;  // per modality, (classes*proxies) x classes

  static ProxyBank init(int classes, int proxies, int modalities, double gamma, Rng& rng,
                        double init_sd = 0.01);

  double* at(int modality, int c, int k) { return w[modality].row(static_cast<std::size_t>(c) * proxies + k); }
  const double* at(int modality, int c, int k) const {
    return w[modality].row(static_cast<std::size_t>(c) * proxies + k);
  }
};

enum class AttentionMode { Soft, Hard, None };
enum class NormAxis { Class, Proxy };

struct MultiModalConfig {
  AttentionMode attention = AttentionMode::Soft;
  NormAxis norm_axis = NormAxis::Class;
  double gamma = 0.1;
  // The attended-output term can be dropped entirely; with it dropped,
  // attention None + proxy-axis normalization reduces the loss to SoftTriple
  // with lambda=1, delta=0.
  bool include_attended = true;
};

struct SoftTripleConfig {
  double lambda = 20.0;  // scaling factor
  double delta = 0.01;   // margin on the label class
  double gamma = 0.1;    // entropy factor of the per-class proxy softmax
  int proxies = 20;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<Matrix> d_outputs;  // same shapes as the modality outputs
  std::vector<Matrix> d_proxies;  // same shapes as ProxyBank::w
};

// ---- MultiModal loss pieces ------------------------------------------------

// sim[i, c*K+k] = sum_m x_i^m . w_c^{k,m}
Matrix mm_similarity(const ModalityOutputs& x, const ProxyBank& bank);

// Soft: row softmax of sim/gamma over the flattened (c,k) axis, rows sum to 1.
// Hard: one-hot at the row argmax, ties to the lowest flat index.
// None: all zeros.
Matrix mm_attention(const Matrix& sim, double gamma, AttentionMode mode);

// A_i = sum_m (sum_ck att[i,ck] w_ck^m + ones) o x_i^m  (o = elementwise)
Matrix mm_attended_output(const ModalityOutputs& x, const ProxyBank& bank, const Matrix& att);

// Normalization weights of the class-similarity score: Class axis -> softmax
// over classes for each fixed proxy slot k; Proxy axis -> softmax over a
// class's own proxy slots (the SoftTriple convention). Returned in the same
// B x (C*K) layout as sim.
Matrix mm_norm_weights(const Matrix& sim, double gamma, NormAxis axis, int classes, int proxies);

// S[i,c] = sum_k weights[i,ck] * sim[i,ck]
Matrix mm_class_similarity(const Matrix& sim, double gamma, NormAxis axis, int classes,
                           int proxies);

struct MmForwardCache {
  MultiModalConfig cfg;
  int batch = 0, classes = 0, proxies = 0, modalities = 0;
  ModalityOutputs x;
  std::vector<Matrix> w;
  std::vector<int> labels;
  Matrix sim;           // B x CK
  Matrix att;           // B x CK
  Matrix norm_weights;  // B x CK
  std::vector<Matrix> proxy_mix;  // per modality B x C: sum_ck att*w
  Matrix attended;      // A, B x C (zeros when the term is excluded)
  Matrix class_sim;     // S, B x C
  Matrix probs;         // softmax(S + A) rows
  double loss = 0.0;    // batch mean of -log softmax(S+A)[label]
};

// Per-instance loss -log( exp(S_iy + A_iy) / sum_c exp(S_ic + A_ic) ),
// evaluated in the log domain; returns the batch mean plus everything the
// backward pass needs.
MmForwardCache mm_loss_forward(const ModalityOutputs& x, const std::vector<int>& labels,
                               const ProxyBank& bank, const MultiModalConfig& cfg);

// Exact gradients of the full loss w.r.t. every output entry and every proxy
// entry, chained through similarity, attention and class normalization. Hard
// attention uses the straight-through convention (no gradient through the
// argmax selection).
LossGrad mm_loss_backward(const MmForwardCache& cache);

double mm_loss_value(const ModalityOutputs& x, const std::vector<int>& labels,
                     const ProxyBank& bank, const MultiModalConfig& cfg);

// ---- Simplified variant (verification target, not the training path) ------

// Simplified forward: att = sim (no softmax, no gamma), S_ic = sum_k sim^2,
// A as in the full loss but with att = sim. Kept purely as a transcription
// check of the closed-form gradients; training always uses the full loss.
double mm_simplified_loss(const ModalityOutputs& x, const std::vector<int>& labels,
                          const ProxyBank& bank);
LossGrad mm_simplified_grads(const ModalityOutputs& x, const std::vector<int>& labels,
                             const ProxyBank& bank);

// ---- SoftTriple ------------------------------------------------------------

// x: one embedding row per instance (B x D); proxies: (C*K) x D. Loss:
//   -log exp(lambda(S_iy - delta)) / (exp(lambda(S_iy - delta)) +
//        sum_{j != y} exp(lambda S_ij))
// with S_ic the proxy-softmax-weighted similarity of class c.
struct SoftTripleResult {
  double loss = 0.0;
  Matrix d_x;        // B x D
  Matrix d_proxies;  // (C*K) x D
  Matrix class_sim;  // S, B x C (used for prediction)
};

SoftTripleResult softtriple_forward_backward(const Matrix& x, const std::vector<int>& labels,
                                             const Matrix& proxies, int classes,
                                             const SoftTripleConfig& cfg);

Matrix softtriple_class_sim(const Matrix& x, const Matrix& proxies, int classes,
                            const SoftTripleConfig& cfg);

// ---- Cross-entropy fusion heads ---------------------------------------------

struct FusionHead {
  enum class Kind { Sum, WeightedSum, Nn };
  Kind kind = Kind::Sum;
  std::vector<double> weights;  // WeightedSum: one scalar per modality
  Matrix W;                     // Nn: (M*C) x C
  std::vector<double> b;        // Nn: C

  static FusionHead sum();
  static FusionHead weighted_sum(std::vector<double> weights);
  static FusionHead nn(int modalities, int classes, Rng& rng);
};

struct FusionGrad {
  double loss = 0.0;
  std::vector<Matrix> d_outputs;
  std::vector<double> d_weights;  // WeightedSum
  Matrix d_W;                     // Nn
  std::vector<double> d_b;        // Nn
};

Matrix fusion_logits(const ModalityOutputs& x, const FusionHead& head);
FusionGrad fusion_ce_forward_backward(const ModalityOutputs& x, const std::vector<int>& labels,
                                      const FusionHead& head);

}  // namespace mml
