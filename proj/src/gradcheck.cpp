#include "mml/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mml/losses.hpp"
#include "mml/mlp.hpp"
#include "mml/numerics.hpp"
#include "mml/rng.hpp"

namespace mml {

namespace {

struct Instance {
  int B, C, K, M;
  ModalityOutputs x;
  std::vector<int> labels;
  ProxyBank bank;
};

Instance random_instance(Rng& rng, int B, int C, int K, int M, double w_sd) {
  Instance ins;
  ins.B = B;
  ins.C = C;
  ins.K = K;
  ins.M = M;
  ins.x.assign(M, Matrix(B, C));
  for (int m = 0; m < M; ++m)
    for (int i = 0; i < B; ++i) {
      double* row = ins.x[m].row(i);
      for (int c = 0; c < C; ++c) row[c] = rng.normal();
      softmax_inplace(row, C);  // probability-like rows, as the model emits
    }
  ins.labels.resize(B);
  for (int i = 0; i < B; ++i) ins.labels[i] = static_cast<int>(rng.below(C));
  ins.bank = ProxyBank::init(C, K, M, 0.1, rng, 1.0);
  for (Matrix& w : ins.bank.w)
    for (double& v : w.storage()) v = rng.normal(0.0, w_sd);
  return ins;
}

// flatten (x, proxies) -> theta and back
std::vector<double> pack(const Instance& ins) {
  std::vector<double> theta;
  for (const Matrix& xm : ins.x)
    theta.insert(theta.end(), xm.storage().begin(), xm.storage().end());
  for (const Matrix& wm : ins.bank.w)
    theta.insert(theta.end(), wm.storage().begin(), wm.storage().end());
  return theta;
}

Instance unpack(const Instance& proto, const std::vector<double>& theta) {
  Instance ins = proto;
  std::size_t pos = 0;
  for (Matrix& xm : ins.x) {
    std::copy(theta.begin() + pos, theta.begin() + pos + xm.size(), xm.data());
    pos += xm.size();
  }
  for (Matrix& wm : ins.bank.w) {
    std::copy(theta.begin() + pos, theta.begin() + pos + wm.size(), wm.data());
    pos += wm.size();
  }
  return ins;
}

std::vector<double> pack_grads(const LossGrad& g) {
  std::vector<double> flat;
  for (const Matrix& m : g.d_outputs)
    flat.insert(flat.end(), m.storage().begin(), m.storage().end());
  for (const Matrix& m : g.d_proxies)
    flat.insert(flat.end(), m.storage().begin(), m.storage().end());
  return flat;
}

void track(GradCheckEntry& entry, double err) {
  entry.max_rel_err = std::max(entry.max_rel_err, err);
  ++entry.instances;
}

double check_mm(const Instance& ins, const MultiModalConfig& cfg) {
  const LossGrad analytic = mm_loss_backward(mm_loss_forward(ins.x, ins.labels, ins.bank, cfg));
  const auto f = [&](const std::vector<double>& theta) {
    const Instance moved = unpack(ins, theta);
    return mm_loss_value(moved.x, moved.labels, moved.bank, cfg);
  };
  return max_rel_err(pack_grads(analytic), finite_diff_grad(f, pack(ins)));
}

double check_simplified(const Instance& ins) {
  const LossGrad analytic = mm_simplified_grads(ins.x, ins.labels, ins.bank);
  const auto f = [&](const std::vector<double>& theta) {
    const Instance moved = unpack(ins, theta);
    return mm_simplified_loss(moved.x, moved.labels, moved.bank);
  };
  return max_rel_err(pack_grads(analytic), finite_diff_grad(f, pack(ins)));
}

double check_softtriple(const Instance& ins, Rng& rng) {
  // single embedding per instance: the concatenated modality outputs
  const int D = ins.M * ins.C;
  Matrix x(ins.B, D);
  for (double& v : x.storage()) v = rng.normal(0.0, 0.5);
  SoftTripleConfig cfg;
  cfg.proxies = ins.K;
  Matrix proxies(static_cast<std::size_t>(ins.C) * ins.K, D);
  for (double& v : proxies.storage()) v = rng.normal(0.0, 0.5);

  const SoftTripleResult analytic =
      softtriple_forward_backward(x, ins.labels, proxies, ins.C, cfg);
  std::vector<double> theta = x.storage();
  theta.insert(theta.end(), proxies.storage().begin(), proxies.storage().end());
  const auto f = [&](const std::vector<double>& t) {
    Matrix xt = x, pt = proxies;
    std::copy(t.begin(), t.begin() + xt.size(), xt.data());
    std::copy(t.begin() + xt.size(), t.end(), pt.data());
    return softtriple_forward_backward(xt, ins.labels, pt, ins.C, cfg).loss;
  };
  std::vector<double> flat = analytic.d_x.storage();
  flat.insert(flat.end(), analytic.d_proxies.storage().begin(),
              analytic.d_proxies.storage().end());
  return max_rel_err(flat, finite_diff_grad(f, theta));
}

double check_fusion(const Instance& ins, const FusionHead& head) {
  const FusionGrad analytic = fusion_ce_forward_backward(ins.x, ins.labels, head);
  std::vector<double> theta;
  for (const Matrix& xm : ins.x)
    theta.insert(theta.end(), xm.storage().begin(), xm.storage().end());
  std::vector<double> flat;
  for (const Matrix& m : analytic.d_outputs)
    flat.insert(flat.end(), m.storage().begin(), m.storage().end());
  if (head.kind == FusionHead::Kind::WeightedSum) {
    theta.insert(theta.end(), head.weights.begin(), head.weights.end());
    flat.insert(flat.end(), analytic.d_weights.begin(), analytic.d_weights.end());
  } else if (head.kind == FusionHead::Kind::Nn) {
    theta.insert(theta.end(), head.W.storage().begin(), head.W.storage().end());
    theta.insert(theta.end(), head.b.begin(), head.b.end());
    flat.insert(flat.end(), analytic.d_W.storage().begin(), analytic.d_W.storage().end());
    flat.insert(flat.end(), analytic.d_b.begin(), analytic.d_b.end());
  }
  const auto f = [&](const std::vector<double>& t) {
    ModalityOutputs x = ins.x;
    FusionHead h = head;
    std::size_t pos = 0;
    for (Matrix& xm : x) {
      std::copy(t.begin() + pos, t.begin() + pos + xm.size(), xm.data());
      pos += xm.size();
    }
    if (h.kind == FusionHead::Kind::WeightedSum) {
      std::copy(t.begin() + pos, t.end(), h.weights.begin());
    } else if (h.kind == FusionHead::Kind::Nn) {
      std::copy(t.begin() + pos, t.begin() + pos + h.W.size(), h.W.data());
      pos += h.W.size();
      std::copy(t.begin() + pos, t.end(), h.b.begin());
    }
    return fusion_ce_forward_backward(x, ins.labels, h).loss;
  };
  return max_rel_err(flat, finite_diff_grad(f, theta));
}

// composed check: MultiModal loss through the softmax-head MLPs
double check_mlp_end_to_end(Rng& rng) {
  const int B = 3, C = 3, M = 2, K = 2, in_dim = 6;
  std::vector<Matrix> feats(M, Matrix(B, in_dim));
  for (Matrix& f : feats)
    for (double& v : f.storage()) v = rng.normal();
  std::vector<int> labels(B);
  for (int i = 0; i < B; ++i) labels[i] = static_cast<int>(rng.below(C));

  MlpStack stack;
  for (int m = 0; m < M; ++m) stack.nets.push_back(Mlp::init({in_dim, 4, C}, rng));
  ProxyBank bank = ProxyBank::init(C, K, M, 0.1, rng, 0.3);
  const MultiModalConfig cfg;

  std::vector<double> theta;
  for (const Mlp& net : stack.nets)
    for (const MlpLayer& layer : net.layers) {
      theta.insert(theta.end(), layer.W.storage().begin(), layer.W.storage().end());
      theta.insert(theta.end(), layer.b.begin(), layer.b.end());
    }
  for (const Matrix& w : bank.w)
    theta.insert(theta.end(), w.storage().begin(), w.storage().end());

  const auto rebuild = [&](const std::vector<double>& t, MlpStack& s, ProxyBank& pb) {
    s = stack;
    pb = bank;
    std::size_t pos = 0;
    for (Mlp& net : s.nets)
      for (MlpLayer& layer : net.layers) {
        std::copy(t.begin() + pos, t.begin() + pos + layer.W.size(), layer.W.data());
        pos += layer.W.size();
        std::copy(t.begin() + pos, t.begin() + pos + layer.b.size(), layer.b.begin());
        pos += layer.b.size();
      }
    for (Matrix& w : pb.w) {
      std::copy(t.begin() + pos, t.begin() + pos + w.size(), w.data());
      pos += w.size();
    }
  };

  MlpCache cache;
  const ModalityOutputs outputs = mlp_forward(stack, feats, &cache);
  const LossGrad lg = mm_loss_backward(mm_loss_forward(outputs, labels, bank, cfg));
  const MlpGrads mg = mlp_backward(stack, cache, lg.d_outputs);
  std::vector<double> flat;
  for (std::size_t m = 0; m < mg.size(); ++m)
    for (const MlpLayer& layer : mg[m]) {
      flat.insert(flat.end(), layer.W.storage().begin(), layer.W.storage().end());
      flat.insert(flat.end(), layer.b.begin(), layer.b.end());
    }
  for (const Matrix& dw : lg.d_proxies)
    flat.insert(flat.end(), dw.storage().begin(), dw.storage().end());

  const auto f = [&](const std::vector<double>& t) {
    MlpStack s;
    ProxyBank pb;
    rebuild(t, s, pb);
    return mm_loss_value(mlp_forward(s, feats), labels, pb, cfg);
  };
  return max_rel_err(flat, finite_diff_grad(f, theta));
}

}  // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed, int rounds) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(seed, "gradcheck"));

  GradCheckEntry full{"multimodal_full"};
  GradCheckEntry hard{"multimodal_hard_attention"};
  GradCheckEntry proxy_axis{"multimodal_proxy_axis"};
  GradCheckEntry no_att{"multimodal_no_attention"};
  GradCheckEntry proxy_no_att{"multimodal_proxy_axis_no_attention"};
  GradCheckEntry no_a_term{"multimodal_no_attended_term"};
  GradCheckEntry simplified{"multimodal_simplified"};
  GradCheckEntry softtriple{"softtriple"};
  GradCheckEntry fsum{"fusion_sum"};
  GradCheckEntry fweighted{"fusion_weighted_sum"};
  GradCheckEntry fnn{"fusion_nn"};
  GradCheckEntry mlp{"mlp_end_to_end"};

  const int Cs[] = {2, 3, 5};
  const int Ks[] = {1, 2, 4};
  const int Ms[] = {1, 2, 3};
  int idx = 0;
  for (int round = 0; round < rounds; ++round) {
    for (int C : Cs)
      for (int K : Ks)
        for (int M : Ms) {
          const int B = (idx % 4) + 1;
          ++idx;
          Instance ins = random_instance(rng, B, C, K, M, 0.5);

          track(full, check_mm(ins, MultiModalConfig{}));
          track(simplified, check_simplified(ins));
          track(softtriple, check_softtriple(ins, rng));
          track(fsum, check_fusion(ins, FusionHead::sum()));
          {
            std::vector<double> weights(M);
            for (double& w : weights) w = rng.uniform() + 0.25;
            track(fweighted, check_fusion(ins, FusionHead::weighted_sum(weights)));
          }
          track(fnn, check_fusion(ins, FusionHead::nn(M, C, rng)));

          // ablation configurations on a thinner schedule
          if (idx % 2 == 0) {
            // hard attention is piecewise smooth; keep the argmax away from a
            // flip within the finite-difference step
            Instance hins = ins;
            for (int tries = 0; tries < 32; ++tries) {
              const Matrix sim = mm_similarity(hins.x, hins.bank);
              double min_gap = 1e30;
              for (std::size_t i = 0; i < sim.rows(); ++i) {
                double top = -1e30, second = -1e30;
                for (std::size_t j = 0; j < sim.cols(); ++j) {
                  if (sim(i, j) > top) {
                    second = top;
                    top = sim(i, j);
                  } else if (sim(i, j) > second) {
                    second = sim(i, j);
                  }
                }
                if (sim.cols() > 1) min_gap = std::min(min_gap, top - second);
              }
              if (min_gap > 1e-3 || sim.cols() == 1) break;
              hins = random_instance(rng, B, C, K, M, 0.5);
            }
            track(hard, check_mm(hins, {AttentionMode::Hard, NormAxis::Class, 0.1, true}));
            track(proxy_axis, check_mm(ins, {AttentionMode::Soft, NormAxis::Proxy, 0.1, true}));
            track(no_att, check_mm(ins, {AttentionMode::None, NormAxis::Class, 0.1, true}));
            track(proxy_no_att,
                  check_mm(ins, {AttentionMode::None, NormAxis::Proxy, 0.1, true}));
            track(no_a_term, check_mm(ins, {AttentionMode::Soft, NormAxis::Class, 0.1, false}));
          }
        }
  }
  for (int r = 0; r < 3; ++r) track(mlp, check_mlp_end_to_end(rng));

  GradCheckReport report;
  report.entries = {full,     hard,   proxy_axis, no_att, proxy_no_att, no_a_term,
                    simplified, softtriple, fsum,   fweighted, fnn,      mlp};
  report.all_pass = true;
  for (GradCheckEntry& e : report.entries) {
    e.pass = e.max_rel_err < e.tolerance;
    report.all_pass = report.all_pass && e.pass;
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mml
