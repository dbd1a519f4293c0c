#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mml/experiment.hpp"
#include "mml/gradcheck.hpp"
#include "mml/json_io.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string out;
  std::string config;
  std::string preset = "reduced";
  std::uint64_t seed = 0;
  bool have_seed = false;
  std::vector<std::string> methods;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> patterns;
  std::vector<int> proxy_counts;
  int jobs = 0;
  bool lr_grid = false;
  bool no_artifacts = false;
  double sigma_easy = -1.0;
  double sigma_noisy = -1.0;
  int histogram_class = -1;
};

std::vector<int> parse_pattern(const std::string& text) {
  if (text == "none" || text.empty()) return {};
  std::vector<int> pattern;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const int idx = std::stoi(text.substr(pos, next - pos));
    if (idx < 1) throw CLI::ValidationError("--pattern", "modality indices are 1-based");
    pattern.push_back(idx - 1);
    pos = next + 1;
  }
  return pattern;
}

mml::ExperimentSpec build_spec(const CommonArgs& args, const std::string& kind) {
  mml::ExperimentSpec spec;
  if (args.preset == "reduced") {
    spec = mml::reduced_preset();
  } else if (args.preset == "full") {
    spec = mml::full_preset();
  } else {
    throw CLI::ValidationError("--preset", "expected 'reduced' or 'full'");
  }
  if (!args.config.empty()) {
    std::ifstream f(args.config);
    if (!f) throw CLI::ValidationError("--config", "cannot read " + args.config);
    nlohmann::json j = nlohmann::json::parse(f);
    mml::ExperimentSpec from_file = spec;
    mml::from_json(j, from_file);
    spec = from_file;
  }
  spec.kind = kind;
  if (args.have_seed) {
    spec.synth.seed = args.seed;
    spec.train.seed = args.seed;
  }
  if (!args.methods.empty()) {
    spec.methods.clear();
    for (const std::string& m : args.methods) spec.methods.push_back(mml::MethodSpec::parse(m));
  }
  if (!args.seeds.empty()) spec.seeds = args.seeds;
  if (!args.patterns.empty()) {
    spec.noise_patterns.clear();
    for (const std::string& p : args.patterns) spec.noise_patterns.push_back(parse_pattern(p));
  }
  if (!args.proxy_counts.empty()) spec.proxy_counts = args.proxy_counts;
  if (args.jobs > 0) spec.jobs = args.jobs;
  if (args.lr_grid) spec.use_lr_grid = true;
  if (args.sigma_easy >= 0.0) spec.sigma_easy = args.sigma_easy;
  if (args.sigma_noisy >= 0.0) spec.sigma_noisy = args.sigma_noisy;
  if (args.histogram_class >= 0) spec.histogram_class = args.histogram_class;
  return spec;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool need_out) {
  auto* out = cmd->add_option("--out", args.out, "output directory");
  if (need_out) out->required();
  cmd->add_option("--config", args.config, "JSON experiment spec");
  cmd->add_option("--preset", args.preset, "reduced | full (default reduced)");
  auto* seed = cmd->add_option("--seed", args.seed, "base seed for data and training streams");
  if (need_out) seed->required();
  cmd->callback([&args, seed]() { args.have_seed = seed->count() > 0; });
  cmd->add_option("--method", args.methods,
                  "method list: multimodal softtriple sum_ce weighted_sum_ce nn_ce unimodal:<m>");
  cmd->add_option("--seeds", args.seeds, "run seeds (default from preset)");
  cmd->add_option("--pattern", args.patterns,
                  "noise pattern, 1-based comma list or 'none'; repeatable");
  cmd->add_option("--proxy-counts", args.proxy_counts, "proxy counts for the sweep");
  cmd->add_option("--jobs", args.jobs, "parallel training runs (default: cores)");
  cmd->add_flag("--lr-grid", args.lr_grid, "tune the learning rate per cell on validation");
  cmd->add_flag("--no-artifacts", args.no_artifacts, "skip per-cell output dumps");
  cmd->add_option("--sigma-easy", args.sigma_easy, "noise level of clean modalities (default 0.2)");
  cmd->add_option("--sigma-noisy", args.sigma_noisy, "noise level of noisy modalities (default 10)");
  cmd->add_option("--histogram-class", args.histogram_class,
                  "class whose predicted probability is binned");
}

int finish_report(const mml::ExperimentReport& report, const CommonArgs& args) {
  mml::write_report(report, args.out, !args.no_artifacts);
  int failed = 0;
  for (const mml::RunCell& cell : report.cells) {
    if (!cell.ok) {
      ++failed;
      std::cerr << "cell failed: " << cell.method
                << (cell.variant.empty() ? "" : " (" + cell.variant + ")") << " seed "
                << cell.seed << ": " << cell.error << "\n";
    }
  }
  std::cout << "report written to " << args.out << " (" << report.cells.size() << " cells, "
            << failed << " failed)\n";
  for (const mml::AggregateRow& row : report.aggregates)
    std::printf("  %-48s acc %.4f +- %.4f\n", row.group.c_str(), row.mean.acc, row.sd.acc);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MultiModal proxy-subgrouping loss: synthetic benchmark harness"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, table_args, grid_args, sweep_args, abl_args;

  auto* generate = app.add_subcommand("generate", "generate a synthetic dataset bundle");
  add_common(generate, gen_args, true);

  auto* train_cmd = app.add_subcommand("train", "single training run with checkpoint");
  add_common(train_cmd, train_args, true);

  auto* table1 = app.add_subcommand("table1", "noise-count study across methods");
  add_common(table1, table_args, true);

  auto* lr_grid = app.add_subcommand("lr-grid", "learning-rate grid on the validation set");
  add_common(lr_grid, grid_args, true);

  auto* sweep = app.add_subcommand("proxy-sweep", "accuracy and time versus proxy count");
  add_common(sweep, sweep_args, true);

  auto* ablation = app.add_subcommand("ablation", "attention/normalization ablation grid");
  add_common(ablation, abl_args, true);

  auto* dump = app.add_subcommand("dump", "raw outputs + histograms of a checkpoint");
  std::string dump_ckpt, dump_data, dump_out, dump_split = "test";
  int dump_hist_class = 1;
  dump->add_option("--checkpoint", dump_ckpt, "checkpoint file")->required();
  dump->add_option("--data", dump_data, "dataset bundle directory")->required();
  dump->add_option("--out", dump_out, "output directory")->required();
  dump->add_option("--split", dump_split, "train | val | test (default test)");
  dump->add_option("--histogram-class", dump_hist_class, "class whose probability is binned");

  auto* gradcheck = app.add_subcommand("gradcheck", "analytic gradients vs finite differences");
  std::uint64_t gc_seed = 0;
  int gc_rounds = 2;
  gradcheck->add_option("--seed", gc_seed, "instance generator seed");
  gradcheck->add_option("--rounds", gc_rounds, "shape-sweep rounds (27 instances each)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      mml::ExperimentSpec spec = build_spec(gen_args, "single_run");
      const std::vector<int> pattern = spec.noise_patterns.front();
      const mml::SynthDataset ds =
          mml::spec_dataset(spec, pattern, spec.seeds.empty() ? 0 : spec.seeds.front());
      mml::save_dataset(ds, gen_args.out);
      const std::vector<double> balance = mml::label_balance(ds);
      std::cout << "dataset written to " << gen_args.out << " (train/val/test class-1 fractions "
                << balance[0] << "/" << balance[1] << "/" << balance[2] << ")\n";
      return 0;
    }
    if (train_cmd->parsed()) {
      mml::ExperimentSpec spec = build_spec(train_args, "single_run");
      fs::create_directories(train_args.out);
      mml::TrainedModel model;
      mml::ExperimentReport report = mml::run_single(spec, &model);
      if (report.cells.front().ok)
        mml::save_checkpoint(model, (fs::path(train_args.out) / "checkpoint.bin").string());
      return finish_report(report, train_args);
    }
    if (table1->parsed()) return finish_report(mml::run_table1(build_spec(table_args, "table1")), table_args);
    if (lr_grid->parsed()) {
      mml::ExperimentSpec spec = build_spec(grid_args, "lr_grid");
      // the grid study runs on data with one noisy modality unless overridden
      if (grid_args.patterns.empty() && spec.synth.n_modalities >= 2)
        spec.noise_patterns = {{spec.synth.n_modalities - 1}};
      return finish_report(mml::run_lr_grid(spec), grid_args);
    }
    if (sweep->parsed() || ablation->parsed()) {
      CommonArgs& args = sweep->parsed() ? sweep_args : abl_args;
      mml::ExperimentSpec spec =
          build_spec(args, sweep->parsed() ? "proxy_sweep" : "ablation");
      // sweep and ablation default to the two-noisy-modality setting, where
      // the subgrouping mechanism is visible
      if (args.patterns.empty() && spec.synth.n_modalities >= 3)
        spec.noise_patterns = {{spec.synth.n_modalities - 2, spec.synth.n_modalities - 1}};
      return finish_report(
          sweep->parsed() ? mml::run_proxy_sweep(spec) : mml::run_ablation(spec), args);
    }
    if (dump->parsed()) {
      const mml::TrainedModel model = mml::load_checkpoint(dump_ckpt);
      const mml::SynthDataset ds = mml::load_dataset(dump_data);
      const mml::SplitData* split = &ds.test;
      if (dump_split == "train") split = &ds.train;
      else if (dump_split == "val") split = &ds.val;
      else if (dump_split != "test")
        throw std::invalid_argument("unknown split: " + dump_split);
      mml::dump_outputs(model, *split, dump_hist_class, dump_out);
      std::cout << "outputs written to " << dump_out << "\n";
      return 0;
    }
    if (gradcheck->parsed()) {
      const mml::GradCheckReport report = mml::run_gradient_checks(gc_seed, gc_rounds);
      for (const mml::GradCheckEntry& e : report.entries)
        std::printf("%-40s max rel err %.3e over %3d instances  %s\n", e.name.c_str(),
                    e.max_rel_err, e.instances, e.pass ? "pass" : "FAIL");
      std::printf("gradcheck %s in %.1f s\n", report.all_pass ? "passed" : "FAILED",
                  report.seconds);
      return report.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
