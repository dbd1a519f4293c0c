#include "mml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mml/numerics.hpp"

namespace mml {

namespace {

void check_outputs(const ModalityOutputs& x, const std::string& where) {
  if (x.empty()) throw std::invalid_argument(where + ": no modalities");
  for (std::size_t m = 0; m < x.size(); ++m) {
    check_shape(x[m].rows() == x[0].rows(),
                where + ": batch axis differs on modality " + std::to_string(m));
    check_shape(x[m].cols() == x[0].cols(),
                where + ": class axis differs on modality " + std::to_string(m));
    if (!x[m].all_finite())
      throw std::invalid_argument(where + ": non-finite input on modality " + std::to_string(m));
  }
}

void check_bank(const ProxyBank& bank, const ModalityOutputs& x, const std::string& where) {
  check_shape(static_cast<int>(x.size()) == bank.modalities, where + ": modality axis");
  check_shape(x[0].cols() == static_cast<std::size_t>(bank.classes), where + ": class axis");
  for (int m = 0; m < bank.modalities; ++m) {
    check_shape(bank.w[m].rows() == static_cast<std::size_t>(bank.classes) * bank.proxies &&
                    bank.w[m].cols() == static_cast<std::size_t>(bank.classes),
                where + ": proxy tensor shape on modality " + std::to_string(m));
    if (!bank.w[m].all_finite())
      throw std::invalid_argument(where + ": non-finite proxy on modality " + std::to_string(m));
  }
}

void check_labels(const std::vector<int>& labels, std::size_t batch, int classes,
                  const std::string& where) {
  if (labels.size() != batch) throw std::invalid_argument(where + ": label count != batch size");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= classes)
      throw std::invalid_argument(where + ": label out of range at index " + std::to_string(i));
}

// mean of -log softmax(logits)[label], log-domain; fills probs with the
// softmax rows and g with (p - onehot)/B
double ce_from_logits(const Matrix& logits, const std::vector<int>& labels, Matrix& probs,
                      Matrix& g) {
  const std::size_t B = logits.rows(), C = logits.cols();
  probs = logits;
  g = Matrix(B, C);
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double lse = log_sum_exp(logits.row(i), C);
    total += lse - logits(i, labels[i]);
    softmax_inplace(probs.row(i), C);
    for (std::size_t c = 0; c < C; ++c) g(i, c) = probs(i, c) / static_cast<double>(B);
    g(i, labels[i]) -= 1.0 / static_cast<double>(B);
  }
  return total / static_cast<double>(B);
}

}  // namespace

ProxyBank ProxyBank::init(int classes, int proxies, int modalities, double gamma, Rng& rng,
                          double init_sd) {
  if (classes < 2 || proxies < 1 || modalities < 1)
    throw std::invalid_argument("ProxyBank: need classes >= 2, proxies >= 1, modalities >= 1");
  if (gamma <= 0.0) throw std::invalid_argument("ProxyBank: gamma must be > 0");
  ProxyBank bank;
  bank.classes = classes;
  bank.proxies = proxies;
  bank.modalities = modalities;
  bank.gamma = gamma;
  bank.w.reserve(modalities);
  for (int m = 0; m < modalities; ++m) {
    Matrix wm(static_cast<std::size_t>(classes) * proxies, classes);
    for (double& v : wm.storage()) v = rng.normal(0.0, init_sd);
    bank.w.push_back(std::move(wm));
  }
  return bank;
}

Matrix mm_similarity(const ModalityOutputs& x, const ProxyBank& bank) {
  check_outputs(x, "mm_similarity");
  check_bank(bank, x, "mm_similarity");
  Matrix sim = matmul_nt(x[0], bank.w[0]);
  for (int m = 1; m < bank.modalities; ++m) {
    const Matrix part = matmul_nt(x[m], bank.w[m]);
    for (std::size_t idx = 0; idx < sim.size(); ++idx) sim.data()[idx] += part.data()[idx];
  }
  return sim;
}

Matrix mm_attention(const Matrix& sim, double gamma, AttentionMode mode) {
  if (gamma <= 0.0) throw std::invalid_argument("mm_attention: invalid scale");
  if (!sim.all_finite()) throw std::invalid_argument("mm_attention: non-finite input");
  Matrix att(sim.rows(), sim.cols());
  switch (mode) {
    case AttentionMode::Soft:
      att = sim;
      for (std::size_t i = 0; i < att.rows(); ++i) softmax_inplace(att.row(i), att.cols(), gamma);
      break;
    case AttentionMode::Hard:
      for (std::size_t i = 0; i < sim.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < sim.cols(); ++j)
          if (sim(i, j) > sim(i, best)) best = j;  // ties keep the lowest index
        att(i, best) = 1.0;
      }
      break;
    case AttentionMode::None:
      break;  // zeros: the attended term degrades to sum of outputs
  }
  return att;
}

Matrix mm_attended_output(const ModalityOutputs& x, const ProxyBank& bank, const Matrix& att) {
  check_outputs(x, "mm_attended_output");
  check_bank(bank, x, "mm_attended_output");
  check_shape(att.rows() == x[0].rows() && att.cols() == bank.w[0].rows(),
              "mm_attended_output: attention axis");
  const std::size_t B = x[0].rows(), C = x[0].cols();
  Matrix attended(B, C);
  for (int m = 0; m < bank.modalities; ++m) {
    const Matrix mix = matmul(att, bank.w[m]);  // B x C
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < C; ++j)
        attended(i, j) += (mix(i, j) + 1.0) * x[m](i, j);
  }
  return attended;
}

Matrix mm_norm_weights(const Matrix& sim, double gamma, NormAxis axis, int classes, int proxies) {
  if (gamma <= 0.0) throw std::invalid_argument("mm_norm_weights: invalid scale");
  if (!sim.all_finite()) throw std::invalid_argument("mm_norm_weights: non-finite input");
  check_shape(sim.cols() == static_cast<std::size_t>(classes) * proxies,
              "mm_norm_weights: proxy axis");
  const std::size_t B = sim.rows();
  Matrix r(B, sim.cols());
  if (axis == NormAxis::Class) {
    // softmax across classes for each fixed proxy slot
    std::vector<double> col(classes);
    for (std::size_t i = 0; i < B; ++i)
      for (int k = 0; k < proxies; ++k) {
        for (int c = 0; c < classes; ++c) col[c] = sim(i, static_cast<std::size_t>(c) * proxies + k);
        softmax_inplace(col.data(), col.size(), gamma);
        for (int c = 0; c < classes; ++c) r(i, static_cast<std::size_t>(c) * proxies + k) = col[c];
      }
  } else {
    // SoftTriple-style softmax across a class's own proxies
    for (std::size_t i = 0; i < B; ++i)
      for (int c = 0; c < classes; ++c) {
        double* row = r.row(i) + static_cast<std::size_t>(c) * proxies;
        const double* srow = sim.row(i) + static_cast<std::size_t>(c) * proxies;
        std::copy(srow, srow + proxies, row);
        softmax_inplace(row, proxies, gamma);
      }
  }
  return r;
}

Matrix mm_class_similarity(const Matrix& sim, double gamma, NormAxis axis, int classes,
                           int proxies) {
  const Matrix r = mm_norm_weights(sim, gamma, axis, classes, proxies);
  Matrix S(sim.rows(), classes);
  for (std::size_t i = 0; i < sim.rows(); ++i)
    for (int c = 0; c < classes; ++c) {
      double acc = 0.0;
      for (int k = 0; k < proxies; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * proxies + k;
        acc += r(i, ck) * sim(i, ck);
      }
      S(i, c) = acc;
    }
  return S;
}

MmForwardCache mm_loss_forward(const ModalityOutputs& x, const std::vector<int>& labels,
                               const ProxyBank& bank, const MultiModalConfig& cfg) {
  check_outputs(x, "mm_loss_forward");
  check_bank(bank, x, "mm_loss_forward");
  check_labels(labels, x[0].rows(), bank.classes, "mm_loss_forward");
  if (cfg.gamma <= 0.0) throw std::invalid_argument("mm_loss_forward: invalid scale");

  MmForwardCache cache;
  cache.cfg = cfg;
  cache.batch = static_cast<int>(x[0].rows());
  cache.classes = bank.classes;
  cache.proxies = bank.proxies;
  cache.modalities = bank.modalities;
  cache.x = x;
  cache.w = bank.w;
  cache.labels = labels;

  cache.sim = mm_similarity(x, bank);
  cache.norm_weights =
      mm_norm_weights(cache.sim, cfg.gamma, cfg.norm_axis, bank.classes, bank.proxies);
  const std::size_t B = x[0].rows(), C = x[0].cols();
  cache.class_sim = Matrix(B, C);
  for (std::size_t i = 0; i < B; ++i)
    for (int c = 0; c < bank.classes; ++c) {
      double acc = 0.0;
      for (int k = 0; k < bank.proxies; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * bank.proxies + k;
        acc += cache.norm_weights(i, ck) * cache.sim(i, ck);
      }
      cache.class_sim(i, c) = acc;
    }

  cache.att = mm_attention(cache.sim, cfg.gamma, cfg.attention);
  cache.attended = Matrix(B, C);
  if (cfg.include_attended) {
    cache.proxy_mix.reserve(bank.modalities);
    for (int m = 0; m < bank.modalities; ++m) {
      Matrix mix = matmul(cache.att, bank.w[m]);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < C; ++j)
          cache.attended(i, j) += (mix(i, j) + 1.0) * x[m](i, j);
      cache.proxy_mix.push_back(std::move(mix));
    }
  }

  Matrix logits = cache.class_sim;
  for (std::size_t idx = 0; idx < logits.size(); ++idx)
    logits.data()[idx] += cache.attended.data()[idx];
  Matrix g;
  cache.loss = ce_from_logits(logits, labels, cache.probs, g);
  return cache;
}

double mm_loss_value(const ModalityOutputs& x, const std::vector<int>& labels,
                     const ProxyBank& bank, const MultiModalConfig& cfg) {
  return mm_loss_forward(x, labels, bank, cfg).loss;
}

LossGrad mm_loss_backward(const MmForwardCache& cache) {
  const int B = cache.batch, C = cache.classes, K = cache.proxies, M = cache.modalities;
  const std::size_t CK = static_cast<std::size_t>(C) * K;
  const double inv_gamma = 1.0 / cache.cfg.gamma;

  LossGrad out;
  out.loss = cache.loss;
  out.d_outputs.assign(M, Matrix(B, C));
  out.d_proxies.assign(M, Matrix(CK, C));

  // g = d loss / d (S + A), already carrying the 1/B of the batch mean
  Matrix g = cache.probs;
  for (int i = 0; i < B; ++i) {
    for (int c = 0; c < C; ++c) g(i, c) /= static_cast<double>(B);
    g(i, cache.labels[i]) -= 1.0 / static_cast<double>(B);
  }

  Matrix dsim(B, CK);

  // S term: S_ic = sum_k r_ick sim_ick with r the axis-normalized softmax
  if (cache.cfg.norm_axis == NormAxis::Class) {
    for (int i = 0; i < B; ++i)
      for (int k = 0; k < K; ++k) {
        double uk = 0.0;
        for (int c = 0; c < C; ++c) {
          const std::size_t ck = static_cast<std::size_t>(c) * K + k;
          uk += g(i, c) * cache.norm_weights(i, ck) * cache.sim(i, ck);
        }
        for (int c = 0; c < C; ++c) {
          const std::size_t ck = static_cast<std::size_t>(c) * K + k;
          dsim(i, ck) += cache.norm_weights(i, ck) *
                         (g(i, c) + inv_gamma * (g(i, c) * cache.sim(i, ck) - uk));
        }
      }
  } else {
    for (int i = 0; i < B; ++i)
      for (int c = 0; c < C; ++c) {
        double sc = 0.0;  // = S_ic
        for (int k = 0; k < K; ++k) {
          const std::size_t ck = static_cast<std::size_t>(c) * K + k;
          sc += cache.norm_weights(i, ck) * cache.sim(i, ck);
        }
        for (int k = 0; k < K; ++k) {
          const std::size_t ck = static_cast<std::size_t>(c) * K + k;
          dsim(i, ck) += g(i, c) * cache.norm_weights(i, ck) *
                         (1.0 + inv_gamma * (cache.sim(i, ck) - sc));
        }
      }
  }

  // A term
  if (cache.cfg.include_attended) {
    if (cache.cfg.attention == AttentionMode::None) {
      // A_i reduces to sum_m x_i^m
      for (int m = 0; m < M; ++m)
        for (std::size_t idx = 0; idx < g.size(); ++idx)
          out.d_outputs[m].data()[idx] += g.data()[idx];
    } else {
      Matrix datt(B, CK);
      for (int m = 0; m < M; ++m) {
        // direct route through x: dA/dx = proxy_mix + 1
        Matrix gx(B, C);  // g o x^m, reused for the proxy and attention routes
        for (int i = 0; i < B; ++i)
          for (int c = 0; c < C; ++c) {
            out.d_outputs[m](i, c) += g(i, c) * (cache.proxy_mix[m](i, c) + 1.0);
            gx(i, c) = g(i, c) * cache.x[m](i, c);
          }
        // direct route through w: dA/dw_ckj = att_ck x_j
        const Matrix dw = matmul_tn(cache.att, gx);
        for (std::size_t idx = 0; idx < dw.size(); ++idx)
          out.d_proxies[m].data()[idx] += dw.data()[idx];
        // route through the attention weights
        const Matrix da = matmul_nt(gx, cache.w[m]);
        for (std::size_t idx = 0; idx < da.size(); ++idx) datt.data()[idx] += da.data()[idx];
      }
      if (cache.cfg.attention == AttentionMode::Soft) {
        // softmax backward over the flattened (c,k) axis
        for (int i = 0; i < B; ++i) {
          double dot = 0.0;
          for (std::size_t ck = 0; ck < CK; ++ck) dot += datt(i, ck) * cache.att(i, ck);
          for (std::size_t ck = 0; ck < CK; ++ck)
            dsim(i, ck) += inv_gamma * cache.att(i, ck) * (datt(i, ck) - dot);
        }
      }
      // Hard attention: straight-through, the argmax selection gets no gradient.
    }
  }

  // sim backward: sim = sum_m x^m w^mT
  for (int m = 0; m < M; ++m) {
    const Matrix dx = matmul(dsim, cache.w[m]);
    for (std::size_t idx = 0; idx < dx.size(); ++idx) out.d_outputs[m].data()[idx] += dx.data()[idx];
    const Matrix dw = matmul_tn(dsim, cache.x[m]);
    for (std::size_t idx = 0; idx < dw.size(); ++idx) out.d_proxies[m].data()[idx] += dw.data()[idx];
  }
  return out;
}

// ---- simplified variant ------------------------------------------------------

namespace {

struct SimplifiedParts {
  Matrix sim;                     // B x CK, doubles as the attention weights
  std::vector<Matrix> proxy_mix;  // per modality B x C
  Matrix logits;                  // S + A
};

SimplifiedParts simplified_forward_parts(const ModalityOutputs& x, const ProxyBank& bank) {
  SimplifiedParts parts;
  parts.sim = mm_similarity(x, bank);
  const std::size_t B = x[0].rows(), C = x[0].cols();
  Matrix attended(B, C);
  parts.proxy_mix.reserve(bank.modalities);
  for (int m = 0; m < bank.modalities; ++m) {
    Matrix mix = matmul(parts.sim, bank.w[m]);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < C; ++j)
        attended(i, j) += (mix(i, j) + 1.0) * x[m](i, j);
    parts.proxy_mix.push_back(std::move(mix));
  }
  parts.logits = attended;
  for (std::size_t i = 0; i < B; ++i)
    for (int c = 0; c < bank.classes; ++c) {
      double s2 = 0.0;
      for (int k = 0; k < bank.proxies; ++k) {
        const double s = parts.sim(i, static_cast<std::size_t>(c) * bank.proxies + k);
        s2 += s * s;
      }
      parts.logits(i, c) += s2;
    }
  return parts;
}

}  // namespace

double mm_simplified_loss(const ModalityOutputs& x, const std::vector<int>& labels,
                          const ProxyBank& bank) {
  check_outputs(x, "mm_simplified_loss");
  check_bank(bank, x, "mm_simplified_loss");
  check_labels(labels, x[0].rows(), bank.classes, "mm_simplified_loss");
  const SimplifiedParts parts = simplified_forward_parts(x, bank);
  double total = 0.0;
  for (std::size_t i = 0; i < parts.logits.rows(); ++i)
    total += log_sum_exp(parts.logits.row(i), parts.logits.cols()) - parts.logits(i, labels[i]);
  return total / static_cast<double>(parts.logits.rows());
}

LossGrad mm_simplified_grads(const ModalityOutputs& x, const std::vector<int>& labels,
                             const ProxyBank& bank) {
  check_outputs(x, "mm_simplified_grads");
  check_bank(bank, x, "mm_simplified_grads");
  check_labels(labels, x[0].rows(), bank.classes, "mm_simplified_grads");
  const int B = static_cast<int>(x[0].rows()), C = bank.classes, K = bank.proxies,
            M = bank.modalities;
  const std::size_t CK = static_cast<std::size_t>(C) * K;
  const SimplifiedParts parts = simplified_forward_parts(x, bank);

  LossGrad out;
  out.d_outputs.assign(M, Matrix(B, C));
  out.d_proxies.assign(M, Matrix(CK, C));

  Matrix probs, g;
  out.loss = ce_from_logits(parts.logits, labels, probs, g);

  // similarity-score route: dS/dsim = 2 sim
  Matrix dsim(B, CK);
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < K; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * K + k;
        dsim(i, ck) = g(i, c) * 2.0 * parts.sim(i, ck);
      }

  for (int m = 0; m < M; ++m) {
    Matrix gx(B, C);
    for (int i = 0; i < B; ++i)
      for (int c = 0; c < C; ++c) {
        // attended-output route, direct in x
        out.d_outputs[m](i, c) += g(i, c) * (parts.proxy_mix[m](i, c) + 1.0);
        gx(i, c) = g(i, c) * x[m](i, c);
      }
    // attended-output route, direct in w (attention weights = sim held fixed)
    const Matrix dw = matmul_tn(parts.sim, gx);
    for (std::size_t idx = 0; idx < dw.size(); ++idx) out.d_proxies[m].data()[idx] += dw.data()[idx];
    // attended-output route through the weights; att = sim, so the softmax
    // Jacobian of the full loss collapses to the identity
    const Matrix da = matmul_nt(gx, bank.w[m]);
    for (std::size_t idx = 0; idx < da.size(); ++idx) dsim.data()[idx] += da.data()[idx];
  }

  for (int m = 0; m < M; ++m) {
    const Matrix dx = matmul(dsim, bank.w[m]);
    for (std::size_t idx = 0; idx < dx.size(); ++idx) out.d_outputs[m].data()[idx] += dx.data()[idx];
    const Matrix dw = matmul_tn(dsim, x[m]);
    for (std::size_t idx = 0; idx < dw.size(); ++idx) out.d_proxies[m].data()[idx] += dw.data()[idx];
  }
  return out;
}

// ---- SoftTriple ---------------------------------------------------------------

Matrix softtriple_class_sim(const Matrix& x, const Matrix& proxies, int classes,
                            const SoftTripleConfig& cfg) {
  check_shape(proxies.rows() == static_cast<std::size_t>(classes) * cfg.proxies,
              "softtriple: proxy axis");
  check_shape(x.cols() == proxies.cols(), "softtriple: embedding axis");
  const Matrix sim = matmul_nt(x, proxies);
  return mm_class_similarity(sim, cfg.gamma, NormAxis::Proxy, classes, cfg.proxies);
}

SoftTripleResult softtriple_forward_backward(const Matrix& x, const std::vector<int>& labels,
                                             const Matrix& proxies, int classes,
                                             const SoftTripleConfig& cfg) {
  if (cfg.lambda <= 0.0 || cfg.gamma <= 0.0 || cfg.delta < 0.0)
    throw std::invalid_argument("softtriple: invalid config");
  check_shape(proxies.rows() == static_cast<std::size_t>(classes) * cfg.proxies,
              "softtriple: proxy axis");
  check_shape(x.cols() == proxies.cols(), "softtriple: embedding axis");
  if (!x.all_finite() || !proxies.all_finite())
    throw std::invalid_argument("softtriple: non-finite input");
  check_labels(labels, x.rows(), classes, "softtriple");

  const int B = static_cast<int>(x.rows()), C = classes, K = cfg.proxies;
  const Matrix sim = matmul_nt(x, proxies);
  const Matrix q = mm_norm_weights(sim, cfg.gamma, NormAxis::Proxy, C, K);

  SoftTripleResult out;
  out.class_sim = Matrix(B, C);
  Matrix logits(B, C);
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * K + k;
        acc += q(i, ck) * sim(i, ck);
      }
      out.class_sim(i, c) = acc;
      logits(i, c) = cfg.lambda * acc;
    }
  for (int i = 0; i < B; ++i) logits(i, labels[i]) -= cfg.lambda * cfg.delta;

  Matrix probs, g;
  out.loss = ce_from_logits(logits, labels, probs, g);

  // dS = lambda * g, then through the per-class proxy softmax
  Matrix dsim(B, static_cast<std::size_t>(C) * K);
  const double inv_gamma = 1.0 / cfg.gamma;
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < C; ++c) {
      const double ds = cfg.lambda * g(i, c);
      for (int k = 0; k < K; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * K + k;
        dsim(i, ck) =
            ds * q(i, ck) * (1.0 + inv_gamma * (sim(i, ck) - out.class_sim(i, c)));
      }
    }
  out.d_x = matmul(dsim, proxies);
  out.d_proxies = matmul_tn(dsim, x);
  return out;
}

// ---- fusion heads ---------------------------------------------------------------

FusionHead FusionHead::sum() { return FusionHead{}; }

FusionHead FusionHead::weighted_sum(std::vector<double> weights) {
  FusionHead h;
  h.kind = Kind::WeightedSum;
  h.weights = std::move(weights);
  return h;
}

FusionHead FusionHead::nn(int modalities, int classes, Rng& rng) {
  FusionHead h;
  h.kind = Kind::Nn;
  const std::size_t in = static_cast<std::size_t>(modalities) * classes;
  h.W = Matrix(in, classes);
  const double limit = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : h.W.storage()) v = (rng.uniform() * 2.0 - 1.0) * limit;
  h.b.assign(classes, 0.0);
  for (double& v : h.b) v = (rng.uniform() * 2.0 - 1.0) * limit;
  return h;
}

Matrix fusion_logits(const ModalityOutputs& x, const FusionHead& head) {
  check_outputs(x, "fusion");
  const std::size_t B = x[0].rows(), C = x[0].cols(), M = x.size();
  switch (head.kind) {
    case FusionHead::Kind::Sum: {
      Matrix logits = x[0];
      for (std::size_t m = 1; m < M; ++m)
        for (std::size_t idx = 0; idx < logits.size(); ++idx)
          logits.data()[idx] += x[m].data()[idx];
      return logits;
    }
    case FusionHead::Kind::WeightedSum: {
      check_shape(head.weights.size() == M, "fusion: weight count vs modality axis");
      Matrix logits(B, C);
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t idx = 0; idx < logits.size(); ++idx)
          logits.data()[idx] += head.weights[m] * x[m].data()[idx];
      return logits;
    }
    case FusionHead::Kind::Nn: {
      check_shape(head.W.rows() == M * C && head.W.cols() == C, "fusion: nn weight axis");
      check_shape(head.b.size() == C, "fusion: nn bias axis");
      Matrix logits(B, C);
      for (std::size_t i = 0; i < B; ++i) {
        double* lr = logits.row(i);
        for (std::size_t c = 0; c < C; ++c) lr[c] = head.b[c];
        for (std::size_t m = 0; m < M; ++m) {
          const double* xr = x[m].row(i);
          for (std::size_t j = 0; j < C; ++j) {
            const double xv = xr[j];
            const double* wrow = head.W.row(m * C + j);
            for (std::size_t c = 0; c < C; ++c) lr[c] += xv * wrow[c];
          }
        }
      }
      return logits;
    }
  }
  throw std::logic_error("fusion: unknown head kind");
}

FusionGrad fusion_ce_forward_backward(const ModalityOutputs& x, const std::vector<int>& labels,
                                      const FusionHead& head) {
  const Matrix logits = fusion_logits(x, head);
  const std::size_t B = x[0].rows(), C = x[0].cols(), M = x.size();
  check_labels(labels, B, static_cast<int>(C), "fusion");

  FusionGrad out;
  Matrix probs, g;
  out.loss = ce_from_logits(logits, labels, probs, g);
  out.d_outputs.assign(M, Matrix(B, C));
  switch (head.kind) {
    case FusionHead::Kind::Sum:
      for (std::size_t m = 0; m < M; ++m) out.d_outputs[m] = g;
      break;
    case FusionHead::Kind::WeightedSum: {
      out.d_weights.assign(M, 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t idx = 0; idx < g.size(); ++idx) {
          out.d_outputs[m].data()[idx] = head.weights[m] * g.data()[idx];
          out.d_weights[m] += g.data()[idx] * x[m].data()[idx];
        }
      }
      break;
    }
    case FusionHead::Kind::Nn: {
      out.d_W = Matrix(M * C, C);
      out.d_b.assign(C, 0.0);
      for (std::size_t i = 0; i < B; ++i) {
        const double* gr = g.row(i);
        for (std::size_t c = 0; c < C; ++c) out.d_b[c] += gr[c];
        for (std::size_t m = 0; m < M; ++m) {
          const double* xr = x[m].row(i);
          double* dxr = out.d_outputs[m].row(i);
          for (std::size_t j = 0; j < C; ++j) {
            const double* wrow = head.W.row(m * C + j);
            double* dwrow = out.d_W.row(m * C + j);
            double acc = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
              acc += gr[c] * wrow[c];
              dwrow[c] += xr[j] * gr[c];
            }
            dxr[j] = acc;
          }
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace mml
