#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mml/adam.hpp"
#include "mml/dataset.hpp"
#include "mml/losses.hpp"
#include "mml/mlp.hpp"
#include "mml/rng.hpp"

namespace mml {

struct MethodSpec {
  enum class Kind { MultiModal, SoftTriple, SumCe, WeightedSumCe, NnCe, Unimodal };
  Kind kind = Kind::MultiModal;
  int modality = 0;             // Unimodal: 0-based modality index
  std::vector<double> weights;  // WeightedSumCe

  std::string label() const;
  // "multimodal", "softtriple", "sum_ce", "nn_ce", "weighted_sum_ce",
  // "unimodal:<1-based index>"
  static MethodSpec parse(const std::string& text);
};

enum class EsCriterion { ValLoss, ValAcc, TrainLoss };

struct TrainConfig {
  MethodSpec method;
  std::vector<int> hidden = {500, 100, 20};
  double lr = 5e-4;
  std::vector<double> lr_grid = {5e-3, 5e-4, 5e-5, 5e-6};
  double weight_decay = 1e-4;
  int patience = 100;
  int max_epochs = 1000;
  int batch_size = 128;
  std::uint64_t seed = 0;
  EsCriterion criterion = EsCriterion::ValLoss;
  // MultiModal loss knobs
  int proxies = 20;
  double gamma = 0.1;
  double proxy_init_sd = 0.01;
  AttentionMode attention = AttentionMode::Soft;
  NormAxis norm_axis = NormAxis::Class;
  bool include_attended = true;
  SoftTripleConfig softtriple;  // independent defaults per the original loss

  MultiModalConfig mm_config() const {
    return MultiModalConfig{attention, norm_axis, gamma, include_attended};
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;  // since training start, measured at epoch end
};

struct TrainedModel {
  TrainConfig cfg;
  std::vector<int> active;  // modality indices this model consumes
  int classes = 0;
  MlpStack stack;
  ProxyBank bank;      // MultiModal
  Matrix st_proxies;   // SoftTriple, (C*K) x (M*C)
  FusionHead head;     // fusion methods
  std::vector<EpochStats> history;
  int best_epoch = 0;       // 0-based index into history
  double wall_seconds = 0.0;
  double seconds_to_best = 0.0;
  // end-of-training optimizer and generator state, kept for checkpoints
  AdamState adam;
  Rng::State rng_state{};
};

// Runs epochs until the early-stopping criterion fails to improve for
// `patience` consecutive epochs or max_epochs is hit; restores the
// best-criterion epoch's parameters. Deterministic given cfg.seed.
TrainedModel train(const SplitData& train_set, const SplitData& val_set, const TrainConfig& cfg);

// Per-modality probability outputs of the trained encoders on the model's
// active modalities. `features` always carries the full modality list.
ModalityOutputs model_outputs(const TrainedModel& model, const std::vector<Matrix>& features);

// The score matrix the method classifies with (argmax over columns).
Matrix model_logits(const TrainedModel& model, const ModalityOutputs& outputs);

std::vector<int> predict_from_logits(const Matrix& logits);

// The method's own loss on the given outputs (no gradients).
double method_loss(const TrainedModel& model, const ModalityOutputs& outputs,
                   const std::vector<int>& labels);

struct LrGridCell {
  double lr = 0.0;
  bool ok = false;
  std::string error;
  double val_loss = 0.0;
  double val_acc = 0.0;
  int best_epoch = 0;
};

struct LrGridResult {
  double best_lr = 0.0;
  std::vector<LrGridCell> cells;
  TrainedModel model;  // the winning run
};

// One training per grid entry; winner = max validation accuracy, ties to the
// smaller lr. Per-cell failures are recorded, not fatal, unless every cell
// fails.
LrGridResult lr_grid_search(const SplitData& train_set, const SplitData& val_set,
                            const TrainConfig& cfg);

// Versioned binary checkpoint: config, every parameter, optimizer state and
// RNG state. Round trips are bit-exact.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace mml
