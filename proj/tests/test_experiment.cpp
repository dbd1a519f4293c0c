#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mml/experiment.hpp"
#include "mml/json_io.hpp"

using namespace mml;
namespace fs = std::filesystem;

namespace {

ExperimentSpec micro_spec() {
  ExperimentSpec spec;
  spec.synth.n_modalities = 2;
  spec.synth.dim = 16;
  spec.synth.n_train = 80;
  spec.synth.n_val = 30;
  spec.synth.n_test = 80;
  spec.synth.sparsity = 5;
  spec.synth.sigma = {0.2, 0.2};
  spec.train.hidden = {8};
  spec.train.batch_size = 32;
  spec.train.max_epochs = 3;
  spec.train.patience = 5;
  spec.train.proxies = 2;
  spec.methods = {MethodSpec::parse("multimodal"), MethodSpec::parse("sum_ce")};
  spec.seeds = {0, 1};
  spec.noise_patterns = {{}, {1}};
  spec.jobs = 2;
  return spec;
}

nlohmann::json strip_wall_clock(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("wall_seconds");
    j.erase("seconds_to_best");
    j.erase("mean_wall_seconds");
    j.erase("mean_seconds_to_best");
    for (auto& [key, value] : j.items()) value = strip_wall_clock(value);
  } else if (j.is_array()) {
    for (auto& value : j) value = strip_wall_clock(value);
  }
  return j;
}

const RunCell* find_cell(const ExperimentReport& report, const std::string& method,
                         std::uint64_t seed, const std::vector<int>& pattern) {
  for (const RunCell& cell : report.cells)
    if (cell.method == method && cell.seed == seed && cell.noise_pattern == pattern) return &cell;
  return nullptr;
}

}  // namespace

TEST_CASE("table1 report") {
  const ExperimentSpec spec = micro_spec();
  const ExperimentReport report = run_table1(spec);

  SUBCASE("every configured cell is present and populated") {
    CHECK(report.cells.size() == 2 * 2 * 2);  // patterns x methods x seeds
    for (const RunCell& cell : report.cells) {
      CHECK(cell.ok);
      CHECK(cell.metrics.acc >= 0.0);
      CHECK(cell.epochs_run >= 1);
      CHECK(cell.histogram.mean_max_prob.size() >= 1);
    }
    CHECK(report.aggregates.size() == 4);  // (method, pattern) groups
  }

  SUBCASE("deterministic apart from wall-clock fields") {
    const ExperimentReport again = run_table1(spec);
    CHECK(strip_wall_clock(report_json(report)).dump() ==
          strip_wall_clock(report_json(again)).dump());
  }

  SUBCASE("removing a method leaves the other cells unchanged") {
    ExperimentSpec solo = spec;
    solo.methods = {MethodSpec::parse("sum_ce")};
    const ExperimentReport solo_report = run_table1(solo);
    for (const RunCell& cell : solo_report.cells) {
      const RunCell* match = find_cell(report, cell.method, cell.seed, cell.noise_pattern);
      REQUIRE(match != nullptr);
      CHECK(cell.metrics.acc == match->metrics.acc);
      CHECK(cell.metrics.mcc == match->metrics.mcc);
      CHECK(cell.val_acc == match->val_acc);
    }
  }

  SUBCASE("the report embeds the fully resolved spec") {
    const nlohmann::json j = report_json(report);
    CHECK(j.at("spec").at("kind") == "table1");
    CHECK(j.at("spec").at("synth").at("dim") == 16);
    CHECK(j.at("spec").at("train").at("max_epochs") == 3);
    CHECK(j.at("spec").at("methods").size() == 2);
  }

  SUBCASE("no methods is a validation error") {
    ExperimentSpec bad = spec;
    bad.methods.clear();
    CHECK_THROWS_AS(run_table1(bad), std::invalid_argument);
  }
}

TEST_CASE("experiment spec json round trip") {
  const ExperimentSpec spec = micro_spec();
  nlohmann::json j = spec;
  ExperimentSpec loaded;
  from_json(j, loaded);
  CHECK(nlohmann::json(loaded).dump() == j.dump());
  CHECK(loaded.synth.dim == 16);
  CHECK(loaded.methods.size() == 2);
  CHECK(loaded.noise_patterns == spec.noise_patterns);
}

TEST_CASE("proxy sweep") {
  ExperimentSpec spec = micro_spec();
  spec.seeds = {0};
  spec.noise_patterns = {{1}};

  SUBCASE("duplicate proxy counts are rejected") {
    spec.proxy_counts = {2, 2};
    CHECK_THROWS_AS(run_proxy_sweep(spec), std::invalid_argument);
  }

  SUBCASE("single count degenerates to one run per seed") {
    spec.proxy_counts = {2};
    const ExperimentReport report = run_proxy_sweep(spec);
    CHECK(report.cells.size() == 1);
    CHECK(report.cells[0].ok);
    CHECK(report.cells[0].proxy_count == 2);
    CHECK(report.cells[0].wall_seconds >= 0.0);
  }

  SUBCASE("all cells populated with timings") {
    spec.proxy_counts = {1, 3};
    const ExperimentReport report = run_proxy_sweep(spec);
    CHECK(report.cells.size() == 2);
    for (const RunCell& cell : report.cells) {
      CHECK(cell.ok);
      CHECK(cell.seconds_to_best >= 0.0);
      CHECK(cell.method == "multimodal");
    }
  }
}

TEST_CASE("ablation grid") {
  ExperimentSpec spec = micro_spec();
  spec.seeds = {0};
  spec.noise_patterns = {{1}};
  const ExperimentReport report = run_ablation(spec);

  REQUIRE(report.cells.size() == 5);
  CHECK(report.cells[0].variant == "full");
  CHECK(report.cells[1].variant == "hard_attention");
  CHECK(report.cells[2].variant == "proxy_axis");
  CHECK(report.cells[3].variant == "no_attention");
  CHECK(report.cells[4].variant == "proxy_axis_no_attention");
  for (const RunCell& cell : report.cells) {
    CHECK(cell.ok);
    CHECK(cell.effective_proxies_mode.size() == 2);
    CHECK(cell.effective_proxies_soft.size() == 2);
  }
  // no-attention modes have zero attention mass by definition
  for (int c : report.cells[4].effective_proxies_mode) CHECK(c == 0);
}

TEST_CASE("report files and artifacts") {
  ExperimentSpec spec = micro_spec();
  spec.seeds = {0};
  spec.methods = {MethodSpec::parse("multimodal")};
  spec.noise_patterns = {{}};
  const ExperimentReport report = run_table1(spec);
  const std::string dir = (fs::temp_directory_path() / "mml_report_test").string();
  fs::remove_all(dir);
  write_report(report, dir);

  CHECK(fs::exists(fs::path(dir) / "report.json"));
  CHECK(fs::exists(fs::path(dir) / "cells.csv"));
  CHECK(fs::exists(fs::path(dir) / "aggregates.csv"));
  bool found_outputs = false, found_hist = false, found_proxies = false;
  for (const auto& entry : fs::recursive_directory_iterator(fs::path(dir) / "cells")) {
    const std::string name = entry.path().filename().string();
    if (name == "outputs_m1.mat") {
      found_outputs = true;
      const Matrix m = load_matrix(entry.path().string());
      CHECK(m.rows() == 80);  // test split size
      CHECK(m.cols() == 2);
    }
    if (name == "histogram.csv") found_hist = true;
    if (name == "proxies_m1.mat") found_proxies = true;
  }
  CHECK(found_outputs);
  CHECK(found_hist);
  CHECK(found_proxies);
  fs::remove_all(dir);
}

TEST_CASE("dump outputs of an untrained model") {
  ExperimentSpec spec = micro_spec();
  spec.train.lr = 0.0;  // keep the initialization
  spec.train.max_epochs = 1;
  const SynthDataset data = spec_dataset(spec, {}, 0);
  const TrainConfig cfg = cell_train_config(spec, MethodSpec::parse("multimodal"), {}, 0);
  const TrainedModel model = train(data.train, data.val, cfg);

  const std::string dir = (fs::temp_directory_path() / "mml_dump_test").string();
  fs::remove_all(dir);
  dump_outputs(model, data.test, 1, dir);
  CHECK(fs::exists(fs::path(dir) / "outputs_m1.mat"));
  CHECK(fs::exists(fs::path(dir) / "outputs_m2.mat"));
  CHECK(fs::exists(fs::path(dir) / "histogram.csv"));
  CHECK(fs::exists(fs::path(dir) / "confidence.csv"));
  const Matrix m1 = load_matrix((fs::path(dir) / "outputs_m1.mat").string());
  CHECK(m1.rows() == data.test.size());

  // softmax of near-zero logits: confidence stays near uniform
  const ModalityOutputs out = model_outputs(model, data.test.features);
  const PredictionHistogram h = prediction_histogram(out, data.test.labels, 1);
  for (double p : h.mean_max_prob) {
    CHECK(p >= 0.5);
    CHECK(p < 0.75);
  }
  fs::remove_all(dir);
}

TEST_CASE("lr grid experiment records the per-rate table") {
  ExperimentSpec spec = micro_spec();
  spec.seeds = {0};
  spec.methods = {MethodSpec::parse("sum_ce")};
  spec.noise_patterns = {{1}};
  spec.train.lr_grid = {1e-2, 1e-3};
  const ExperimentReport report = run_lr_grid(spec);
  REQUIRE(report.cells.size() == 1);
  const RunCell& cell = report.cells[0];
  CHECK(cell.ok);
  REQUIRE(cell.grid.size() == 2);
  CHECK((cell.lr_used == 1e-2 || cell.lr_used == 1e-3));
  double winner_acc = 0.0;
  for (const LrGridCell& g : cell.grid)
    if (g.lr == cell.lr_used) winner_acc = g.val_acc;
  for (const LrGridCell& g : cell.grid)
    if (g.ok) CHECK(winner_acc >= g.val_acc);
}
