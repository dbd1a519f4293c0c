#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mml/metrics.hpp"
#include "mml/synthdata.hpp"
#include "mml/train.hpp"

namespace mml {

struct ExperimentSpec {
  std::string kind = "single_run";  // table1 | lr_grid | proxy_sweep | ablation | single_run
  SynthConfig synth;
  TrainConfig train;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<std::vector<int>> noise_patterns = {{}};  // 0-based noisy modality indices
  double sigma_easy = 0.2;
  double sigma_noisy = 10.0;
  std::vector<int> proxy_counts = {1, 2, 5, 10, 20, 50, 100};
  bool use_lr_grid = false;
  int histogram_class = 1;
  int jobs = 0;  // 0 = hardware concurrency
};

void to_json(nlohmann::json& j, const ExperimentSpec& spec);
void from_json(const nlohmann::json& j, ExperimentSpec& spec);

// Desk-scale preset: dim 200, splits 2000/500/2000, encoders 200-64-32-16-C.
ExperimentSpec reduced_preset();
// Full-scale preset: dim 2000, splits 10000/1000/10000, encoders
// 2000-500-100-20-C, learning-rate grid enabled. Hours of CPU.
ExperimentSpec full_preset();

struct RunCell {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<int> noise_pattern;
  int proxy_count = 0;     // proxy_sweep only
  std::string variant;     // ablation row name
  bool ok = false;
  std::string error;
  ClassificationMetrics metrics;
  double val_acc = 0.0;
  double lr_used = 0.0;
  std::vector<LrGridCell> grid;  // populated when grid search ran
  int epochs_run = 0;
  int best_epoch = 0;
  double wall_seconds = 0.0;
  double seconds_to_best = 0.0;
  PredictionHistogram histogram;
  // per class: proxies whose attention mass exceeds 1/(C*K*10) on >= 1 test
  // instance, measured in the cell's own attention mode and with a soft
  // recomputation for comparability across modes
  std::vector<int> effective_proxies_mode;
  std::vector<int> effective_proxies_soft;
  // artifacts for dump: test-split outputs and trained proxies
  ModalityOutputs test_outputs;
  std::vector<Matrix> trained_proxies;
};

struct AggregateRow {
  std::string group;  // method or variant plus pattern / proxy count
  int cells = 0;
  ClassificationMetrics mean;
  ClassificationMetrics sd;
  double mean_wall_seconds = 0.0;
  double mean_seconds_to_best = 0.0;
};

struct ExperimentReport {
  std::string kind;
  ExperimentSpec spec;  // fully resolved
  std::vector<RunCell> cells;
  std::vector<AggregateRow> aggregates;
};

// Dataset and per-cell training config exactly as the experiment runners
// derive them, so a standalone run reproduces the matching experiment cell.
SynthDataset spec_dataset(const ExperimentSpec& spec, const std::vector<int>& pattern,
                          std::uint64_t run_seed);
TrainConfig cell_train_config(const ExperimentSpec& spec, const MethodSpec& method,
                              const std::vector<int>& pattern, std::uint64_t seed);

ExperimentReport run_table1(const ExperimentSpec& spec);
ExperimentReport run_lr_grid(const ExperimentSpec& spec);
ExperimentReport run_proxy_sweep(const ExperimentSpec& spec);
ExperimentReport run_ablation(const ExperimentSpec& spec);
// model_out, when given, receives the trained model (for checkpointing)
ExperimentReport run_single(const ExperimentSpec& spec, TrainedModel* model_out = nullptr);
ExperimentReport run_experiment(const ExperimentSpec& spec);

// report.json + cells.csv + per-cell artifact directories (outputs,
// histograms, proxies) under <dir>/cells/.
void write_report(const ExperimentReport& report, const std::string& dir,
                  bool cell_artifacts = true);

nlohmann::json report_json(const ExperimentReport& report);

// Raw per-modality outputs of a trained model on one split, plus histogram
// CSV and the trained proxy bank.
void dump_outputs(const TrainedModel& model, const SplitData& split, int histogram_class,
                  const std::string& dir);

// the five ablation rows, full configuration first
struct AblationVariant {
  std::string name;
  AttentionMode attention;
  NormAxis norm_axis;
};
const std::vector<AblationVariant>& ablation_variants();

}  // namespace mml
