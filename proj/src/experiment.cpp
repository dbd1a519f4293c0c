#include "mml/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mml/json_io.hpp"
#include "mml/rng.hpp"

namespace mml {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const ExperimentSpec& spec) {
  j = nlohmann::json{{"kind", spec.kind},
                     {"synth", spec.synth},
                     {"train", spec.train},
                     {"methods", spec.methods},
                     {"seeds", spec.seeds},
                     {"noise_patterns", spec.noise_patterns},
                     {"sigma_easy", spec.sigma_easy},
                     {"sigma_noisy", spec.sigma_noisy},
                     {"proxy_counts", spec.proxy_counts},
                     {"use_lr_grid", spec.use_lr_grid},
                     {"histogram_class", spec.histogram_class},
                     {"jobs", spec.jobs}};
}

void from_json(const nlohmann::json& j, ExperimentSpec& spec) {
  // merge semantics throughout: absent keys keep the values already in spec
  const ExperimentSpec defaults = spec;
  spec.kind = j.value("kind", defaults.kind);
  if (j.contains("synth")) from_json(j.at("synth"), spec.synth);
  if (j.contains("train")) from_json(j.at("train"), spec.train);
  if (j.contains("methods")) spec.methods = j.at("methods").get<std::vector<MethodSpec>>();
  spec.seeds = j.value("seeds", defaults.seeds);
  spec.noise_patterns = j.value("noise_patterns", defaults.noise_patterns);
  spec.sigma_easy = j.value("sigma_easy", defaults.sigma_easy);
  spec.sigma_noisy = j.value("sigma_noisy", defaults.sigma_noisy);
  spec.proxy_counts = j.value("proxy_counts", defaults.proxy_counts);
  spec.use_lr_grid = j.value("use_lr_grid", defaults.use_lr_grid);
  spec.histogram_class = j.value("histogram_class", defaults.histogram_class);
  spec.jobs = j.value("jobs", defaults.jobs);
}

ExperimentSpec reduced_preset() {
  ExperimentSpec spec;
  spec.synth.dim = 200;
  spec.synth.n_train = 2000;
  spec.synth.n_val = 500;
  spec.synth.n_test = 2000;
  spec.train.hidden = {64, 32, 16};
  spec.train.batch_size = 128;
  spec.train.lr = 5e-4;
  spec.train.patience = 100;
  spec.train.max_epochs = 300;
  // Desk scale inverts the full-scale difficulty ordering: the noisy
  // modalities memorize slower than the clean signal is learned, so a
  // validation-loss stop halts before the fusion-corruption dynamics the
  // noise study measures even begin. Training-loss monitoring runs the
  // protocol through that regime.
  spec.train.criterion = EsCriterion::TrainLoss;
  spec.methods = {MethodSpec::parse("multimodal"), MethodSpec::parse("sum_ce"),
                  MethodSpec::parse("nn_ce"),      MethodSpec::parse("softtriple"),
                  MethodSpec::parse("unimodal:1"), MethodSpec::parse("unimodal:2"),
                  MethodSpec::parse("unimodal:3")};
  spec.seeds = {0, 1, 2};
  spec.noise_patterns = {{}, {2}, {1, 2}};
  return spec;
}

ExperimentSpec full_preset() {
  ExperimentSpec spec;
  spec.train.patience = 100;
  spec.train.max_epochs = 1000;
  spec.methods = {MethodSpec::parse("multimodal"), MethodSpec::parse("sum_ce"),
                  MethodSpec::parse("nn_ce"),      MethodSpec::parse("softtriple"),
                  MethodSpec::parse("unimodal:1"), MethodSpec::parse("unimodal:2"),
                  MethodSpec::parse("unimodal:3")};
  spec.seeds = {0, 1, 2, 3, 4};
  spec.noise_patterns = {{}, {2}, {1, 2}};
  spec.use_lr_grid = true;
  return spec;
}

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> rows = {
      {"full", AttentionMode::Soft, NormAxis::Class},
      {"hard_attention", AttentionMode::Hard, NormAxis::Class},
      {"proxy_axis", AttentionMode::Soft, NormAxis::Proxy},
      {"no_attention", AttentionMode::None, NormAxis::Class},
      {"proxy_axis_no_attention", AttentionMode::None, NormAxis::Proxy},
  };
  return rows;
}

namespace {

std::string pattern_label(const std::vector<int>& pattern) {
  if (pattern.empty()) return "none";
  std::string out;
  for (std::size_t t = 0; t < pattern.size(); ++t) {
    if (t) out += "+";
    out += "m" + std::to_string(pattern[t] + 1);
  }
  return out;
}

std::string cell_tag(const RunCell& cell) {
  std::string tag = cell.method;
  if (!cell.variant.empty()) tag += "|variant=" + cell.variant;
  if (cell.proxy_count > 0) tag += "|K=" + std::to_string(cell.proxy_count);
  tag += "|noise=" + pattern_label(cell.noise_pattern);
  tag += "|seed=" + std::to_string(cell.seed);
  return tag;
}

std::string cell_dir_name(const RunCell& cell) {
  std::string s = cell_tag(cell);
  for (char& c : s)
    if (c == '|' || c == ':' || c == '=' || c == '+') c = '_';
  return s;
}

std::vector<double> pattern_sigma(const ExperimentSpec& spec, const std::vector<int>& pattern) {
  std::vector<double> sigma(spec.synth.n_modalities, spec.sigma_easy);
  for (int j : pattern) {
    if (j < 0 || j >= spec.synth.n_modalities)
      throw std::invalid_argument("noise pattern index out of range: " + std::to_string(j));
    sigma[j] = spec.sigma_noisy;
  }
  return sigma;
}

SynthDataset make_dataset(const ExperimentSpec& spec, const std::vector<int>& pattern,
                          std::uint64_t run_seed) {
  SynthConfig cfg = spec.synth;
  cfg.sigma = pattern_sigma(spec, pattern);
  cfg.seed = derive_seed(spec.synth.seed,
                         "data|noise=" + pattern_label(pattern) + "|seed=" + std::to_string(run_seed));
  return generate(cfg);
}

void effective_proxy_counts(const TrainedModel& model, const ModalityOutputs& outputs,
                            RunCell& cell) {
  if (model.cfg.method.kind != MethodSpec::Kind::MultiModal) return;
  const int C = model.bank.classes, K = model.bank.proxies;
  const double threshold = 1.0 / (static_cast<double>(C) * K * 10.0);
  const Matrix sim = mm_similarity(outputs, model.bank);
  const auto count = [&](AttentionMode mode) {
    const Matrix att = mm_attention(sim, model.cfg.gamma, mode);
    std::vector<int> per_class(C, 0);
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < K; ++k) {
        const std::size_t ck = static_cast<std::size_t>(c) * K + k;
        for (std::size_t i = 0; i < att.rows(); ++i)
          if (att(i, ck) > threshold) {
            ++per_class[c];
            break;
          }
      }
    return per_class;
  };
  cell.effective_proxies_mode = count(model.cfg.attention);
  cell.effective_proxies_soft = count(AttentionMode::Soft);
}

void execute_cell(RunCell& cell, const SynthDataset& data, const ExperimentSpec& spec,
                  const TrainConfig& cell_cfg, TrainedModel* model_out = nullptr) {
  try {
    TrainConfig cfg = cell_cfg;
    cfg.seed = derive_seed(spec.train.seed, "train|" + cell_tag(cell));
    TrainedModel model;
    if (spec.use_lr_grid) {
      LrGridResult grid = lr_grid_search(data.train, data.val, cfg);
      cell.grid = grid.cells;
      cell.lr_used = grid.best_lr;
      model = std::move(grid.model);
    } else {
      model = train(data.train, data.val, cfg);
      cell.lr_used = cfg.lr;
    }

    const ModalityOutputs outputs = model_outputs(model, data.test.features);
    const std::vector<int> pred = predict_from_logits(model_logits(model, outputs));
    const ConfusionMatrix cm =
        ConfusionMatrix::from_predictions(data.test.labels, pred, model.classes);
    cell.metrics = classification_metrics(cm);
    cell.val_acc = model.history[model.best_epoch].val_acc;
    cell.epochs_run = static_cast<int>(model.history.size());
    cell.best_epoch = model.best_epoch;
    cell.wall_seconds = model.wall_seconds;
    cell.seconds_to_best = model.seconds_to_best;
    const int hist_class = std::min(spec.histogram_class, model.classes - 1);
    cell.histogram = prediction_histogram(outputs, data.test.labels, std::max(0, hist_class));
    effective_proxy_counts(model, outputs, cell);
    cell.test_outputs = outputs;
    if (model.cfg.method.kind == MethodSpec::Kind::MultiModal) {
      cell.trained_proxies = model.bank.w;
    } else if (model.cfg.method.kind == MethodSpec::Kind::SoftTriple) {
      cell.trained_proxies = {model.st_proxies};
    }
    if (model_out) *model_out = std::move(model);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
}

void run_jobs(std::vector<std::function<void()>>& jobs, int workers) {
  if (workers <= 1 || jobs.size() <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      jobs[i]();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
  pool.reserve(n);
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

int resolve_jobs(const ExperimentSpec& spec) {
  if (spec.jobs > 0) return spec.jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

ClassificationMetrics operator+(const ClassificationMetrics& a, const ClassificationMetrics& b) {
  return {a.acc + b.acc, a.fm + b.fm, a.fw + b.fw, a.mcc + b.mcc};
}

void compute_aggregates(ExperimentReport& report) {
  struct Stats {
    std::string group;
    std::vector<ClassificationMetrics> metrics;
    double wall = 0.0, to_best = 0.0;
  };
  std::vector<Stats> groups;
  std::map<std::string, std::size_t> index;
  for (const RunCell& cell : report.cells) {
    if (!cell.ok) continue;
    std::string key = cell.method;
    if (!cell.variant.empty()) key += "/" + cell.variant;
    if (cell.proxy_count > 0) key += "/K=" + std::to_string(cell.proxy_count);
    key += "/noise=" + pattern_label(cell.noise_pattern);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back({key, {}, 0.0, 0.0});
      it = index.find(key);
    }
    Stats& st = groups[it->second];
    st.metrics.push_back(cell.metrics);
    st.wall += cell.wall_seconds;
    st.to_best += cell.seconds_to_best;
  }
  for (const Stats& st : groups) {
    AggregateRow row;
    row.group = st.group;
    row.cells = static_cast<int>(st.metrics.size());
    const double n = static_cast<double>(st.metrics.size());
    ClassificationMetrics sum;
    for (const auto& m : st.metrics) sum = sum + m;
    row.mean = {sum.acc / n, sum.fm / n, sum.fw / n, sum.mcc / n};
    ClassificationMetrics var;
    for (const auto& m : st.metrics) {
      var.acc += (m.acc - row.mean.acc) * (m.acc - row.mean.acc);
      var.fm += (m.fm - row.mean.fm) * (m.fm - row.mean.fm);
      var.fw += (m.fw - row.mean.fw) * (m.fw - row.mean.fw);
      var.mcc += (m.mcc - row.mean.mcc) * (m.mcc - row.mean.mcc);
    }
    const double dof = n > 1 ? n - 1 : 1;
    row.sd = {std::sqrt(var.acc / dof), std::sqrt(var.fm / dof), std::sqrt(var.fw / dof),
              std::sqrt(var.mcc / dof)};
    row.mean_wall_seconds = st.wall / n;
    row.mean_seconds_to_best = st.to_best / n;
    report.aggregates.push_back(std::move(row));
  }
}

// Cells grouped by their dataset so only one dataset lives in memory at a
// time; cells inside a group run in parallel.
void run_cell_matrix(ExperimentReport& report, const ExperimentSpec& spec,
                     const std::vector<TrainConfig>& configs,
                     TrainedModel* first_model_out = nullptr) {
  const int workers = resolve_jobs(spec);
  std::map<std::pair<std::string, std::uint64_t>, std::vector<std::size_t>> by_dataset;
  for (std::size_t i = 0; i < report.cells.size(); ++i)
    by_dataset[{pattern_label(report.cells[i].noise_pattern), report.cells[i].seed}].push_back(i);
  for (const auto& [key, cell_ids] : by_dataset) {
    const SynthDataset data = make_dataset(spec, report.cells[cell_ids.front()].noise_pattern,
                                           report.cells[cell_ids.front()].seed);
    std::vector<std::function<void()>> jobs;
    jobs.reserve(cell_ids.size());
    for (std::size_t id : cell_ids)
      jobs.push_back([&report, &spec, &configs, &data, id, first_model_out]() {
        execute_cell(report.cells[id], data, spec, configs[id],
                     id == 0 ? first_model_out : nullptr);
      });
    run_jobs(jobs, workers);
  }
  compute_aggregates(report);
}

}  // namespace

SynthDataset spec_dataset(const ExperimentSpec& spec, const std::vector<int>& pattern,
                          std::uint64_t run_seed) {
  return make_dataset(spec, pattern, run_seed);
}

TrainConfig cell_train_config(const ExperimentSpec& spec, const MethodSpec& method,
                              const std::vector<int>& pattern, std::uint64_t seed) {
  RunCell cell;
  cell.method = method.label();
  cell.seed = seed;
  cell.noise_pattern = pattern;
  TrainConfig cfg = spec.train;
  cfg.method = method;
  cfg.seed = derive_seed(spec.train.seed, "train|" + cell_tag(cell));
  return cfg;
}

ExperimentReport run_table1(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw std::invalid_argument("table1: no methods configured");
  if (spec.seeds.empty()) throw std::invalid_argument("table1: no seeds configured");
  ExperimentReport report;
  report.kind = "table1";
  report.spec = spec;
  report.spec.kind = "table1";
  std::vector<TrainConfig> configs;
  for (const auto& pattern : spec.noise_patterns)
    for (const MethodSpec& method : spec.methods)
      for (std::uint64_t seed : spec.seeds) {
        RunCell cell;
        cell.method = method.label();
        cell.seed = seed;
        cell.noise_pattern = pattern;
        report.cells.push_back(std::move(cell));
        TrainConfig cfg = spec.train;
        cfg.method = method;
        configs.push_back(std::move(cfg));
      }
  run_cell_matrix(report, spec, configs);
  return report;
}

ExperimentReport run_lr_grid(const ExperimentSpec& spec) {
  if (spec.methods.empty()) throw std::invalid_argument("lr_grid: no methods configured");
  if (spec.seeds.empty()) throw std::invalid_argument("lr_grid: no seeds configured");
  if (spec.train.lr_grid.empty()) throw std::invalid_argument("lr_grid: empty grid");
  ExperimentSpec resolved = spec;
  resolved.kind = "lr_grid";
  resolved.use_lr_grid = true;
  ExperimentReport report;
  report.kind = "lr_grid";
  report.spec = resolved;
  const std::vector<int>& pattern = resolved.noise_patterns.front();
  std::vector<TrainConfig> configs;
  for (const MethodSpec& method : resolved.methods)
    for (std::uint64_t seed : resolved.seeds) {
      RunCell cell;
      cell.method = method.label();
      cell.seed = seed;
      cell.noise_pattern = pattern;
      report.cells.push_back(std::move(cell));
      TrainConfig cfg = resolved.train;
      cfg.method = method;
      configs.push_back(std::move(cfg));
    }
  run_cell_matrix(report, resolved, configs);
  return report;
}

ExperimentReport run_proxy_sweep(const ExperimentSpec& spec) {
  if (spec.proxy_counts.empty()) throw std::invalid_argument("proxy_sweep: empty proxy list");
  if (spec.seeds.empty()) throw std::invalid_argument("proxy_sweep: no seeds configured");
  std::set<int> unique(spec.proxy_counts.begin(), spec.proxy_counts.end());
  if (unique.size() != spec.proxy_counts.size())
    throw std::invalid_argument("proxy_sweep: duplicate proxy counts");
  for (int k : spec.proxy_counts)
    if (k < 1) throw std::invalid_argument("proxy_sweep: proxy counts must be >= 1");
  ExperimentReport report;
  report.kind = "proxy_sweep";
  report.spec = spec;
  report.spec.kind = "proxy_sweep";
  const std::vector<int>& pattern = spec.noise_patterns.front();
  std::vector<TrainConfig> configs;
  for (int k : spec.proxy_counts)
    for (std::uint64_t seed : spec.seeds) {
      RunCell cell;
      cell.method = "multimodal";
      cell.seed = seed;
      cell.noise_pattern = pattern;
      cell.proxy_count = k;
      report.cells.push_back(std::move(cell));
      TrainConfig cfg = spec.train;
      cfg.method = MethodSpec{};  // multimodal
      cfg.proxies = k;
      configs.push_back(std::move(cfg));
    }
  run_cell_matrix(report, spec, configs);
  return report;
}

ExperimentReport run_ablation(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw std::invalid_argument("ablation: no seeds configured");
  ExperimentReport report;
  report.kind = "ablation";
  report.spec = spec;
  report.spec.kind = "ablation";
  const std::vector<int>& pattern = spec.noise_patterns.front();
  std::vector<TrainConfig> configs;
  for (const AblationVariant& variant : ablation_variants())
    for (std::uint64_t seed : spec.seeds) {
      RunCell cell;
      cell.method = "multimodal";
      cell.variant = variant.name;
      cell.seed = seed;
      cell.noise_pattern = pattern;
      report.cells.push_back(std::move(cell));
      TrainConfig cfg = spec.train;
      cfg.method = MethodSpec{};
      cfg.attention = variant.attention;
      cfg.norm_axis = variant.norm_axis;
      configs.push_back(std::move(cfg));
    }
  run_cell_matrix(report, spec, configs);
  return report;
}

ExperimentReport run_single(const ExperimentSpec& spec, TrainedModel* model_out) {
  if (spec.methods.empty()) throw std::invalid_argument("single_run: no methods configured");
  if (spec.seeds.empty()) throw std::invalid_argument("single_run: no seeds configured");
  ExperimentReport report;
  report.kind = "single_run";
  report.spec = spec;
  report.spec.kind = "single_run";
  RunCell cell;
  cell.method = spec.methods.front().label();
  cell.seed = spec.seeds.front();
  cell.noise_pattern = spec.noise_patterns.front();
  report.cells.push_back(std::move(cell));
  TrainConfig cfg = spec.train;
  cfg.method = spec.methods.front();
  run_cell_matrix(report, spec, {cfg}, model_out);
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  if (spec.kind == "table1") return run_table1(spec);
  if (spec.kind == "lr_grid") return run_lr_grid(spec);
  if (spec.kind == "proxy_sweep") return run_proxy_sweep(spec);
  if (spec.kind == "ablation") return run_ablation(spec);
  if (spec.kind == "single_run") return run_single(spec);
  throw std::invalid_argument("unknown experiment kind: " + spec.kind);
}

namespace {

nlohmann::json histogram_json(const PredictionHistogram& h) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& per_label : h.counts) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& bins : per_label) labels.push_back(bins);
    counts.push_back(labels);
  }
  return nlohmann::json{{"class_of_interest", h.class_of_interest},
                        {"mean_max_prob", h.mean_max_prob},
                        {"counts", counts}};
}

nlohmann::json cell_json(const RunCell& cell) {
  nlohmann::json j{{"method", cell.method},
                   {"seed", cell.seed},
                   {"noise_pattern", cell.noise_pattern},
                   {"noise", pattern_label(cell.noise_pattern)},
                   {"status", cell.ok ? "ok" : "failed"}};
  if (!cell.variant.empty()) j["variant"] = cell.variant;
  if (cell.proxy_count > 0) j["proxy_count"] = cell.proxy_count;
  if (!cell.ok) {
    j["error"] = cell.error;
    return j;
  }
  j["metrics"] = {{"acc", cell.metrics.acc},
                  {"fm", cell.metrics.fm},
                  {"fw", cell.metrics.fw},
                  {"mcc", cell.metrics.mcc}};
  j["val_acc"] = cell.val_acc;
  j["lr"] = cell.lr_used;
  j["epochs_run"] = cell.epochs_run;
  j["best_epoch"] = cell.best_epoch;
  j["wall_seconds"] = cell.wall_seconds;
  j["seconds_to_best"] = cell.seconds_to_best;
  j["histogram"] = histogram_json(cell.histogram);
  if (!cell.effective_proxies_mode.empty()) {
    j["effective_proxies_mode"] = cell.effective_proxies_mode;
    j["effective_proxies_soft"] = cell.effective_proxies_soft;
  }
  if (!cell.grid.empty()) {
    nlohmann::json grid = nlohmann::json::array();
    for (const LrGridCell& g : cell.grid)
      grid.push_back({{"lr", g.lr},
                      {"ok", g.ok},
                      {"error", g.error},
                      {"val_acc", g.val_acc},
                      {"val_loss", g.val_loss},
                      {"best_epoch", g.best_epoch}});
    j["grid"] = grid;
  }
  return j;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ";";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(10);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ";";
    out << v[i];
  }
  return out.str();
}

}  // namespace

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const RunCell& cell : report.cells) cells.push_back(cell_json(cell));
  nlohmann::json aggregates = nlohmann::json::array();
  for (const AggregateRow& row : report.aggregates)
    aggregates.push_back({{"group", row.group},
                          {"cells", row.cells},
                          {"mean_acc", row.mean.acc},
                          {"sd_acc", row.sd.acc},
                          {"mean_fm", row.mean.fm},
                          {"sd_fm", row.sd.fm},
                          {"mean_fw", row.mean.fw},
                          {"sd_fw", row.sd.fw},
                          {"mean_mcc", row.mean.mcc},
                          {"sd_mcc", row.sd.mcc},
                          {"mean_wall_seconds", row.mean_wall_seconds},
                          {"mean_seconds_to_best", row.mean_seconds_to_best}});
  return nlohmann::json{
      {"kind", report.kind}, {"spec", report.spec}, {"cells", cells}, {"aggregates", aggregates}};
}

namespace {

void write_histogram_csv(const PredictionHistogram& h, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "modality,true_label,bin_lo,bin_hi,count,fraction\n";
  for (std::size_t m = 0; m < h.counts.size(); ++m)
    for (int label = 0; label < h.classes; ++label) {
      std::int64_t stratum = 0;
      for (std::int64_t c : h.counts[m][label]) stratum += c;
      for (int bin = 0; bin < PredictionHistogram::kBins; ++bin) {
        const double frac =
            stratum > 0 ? static_cast<double>(h.counts[m][label][bin]) / stratum : 0.0;
        f << (m + 1) << ',' << label << ',' << bin * 0.1 << ',' << (bin + 1) * 0.1 << ','
          << h.counts[m][label][bin] << ',' << frac << '\n';
      }
    }
}

void write_confidence_csv(const PredictionHistogram& h, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "modality,mean_max_prob\n";
  for (std::size_t m = 0; m < h.mean_max_prob.size(); ++m)
    f << (m + 1) << ',' << h.mean_max_prob[m] << '\n';
}

}  // namespace

void write_report(const ExperimentReport& report, const std::string& dir, bool cell_artifacts) {
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "report.json");
    if (!f) throw std::runtime_error("cannot write report.json in " + dir);
    f << report_json(report).dump(2) << "\n";
  }
  {
    std::ofstream f(fs::path(dir) / "cells.csv");
    if (!f) throw std::runtime_error("cannot write cells.csv in " + dir);
    f << "kind,variant,method,seed,noise,proxy_count,lr,status,acc,fm,fw,mcc,val_acc,"
         "epochs_run,best_epoch,wall_seconds,seconds_to_best,mean_max_prob,"
         "effective_proxies_mode,effective_proxies_soft,error\n";
    f.precision(10);
    for (const RunCell& cell : report.cells) {
      f << report.kind << ',' << cell.variant << ',' << cell.method << ',' << cell.seed << ','
        << pattern_label(cell.noise_pattern) << ',' << cell.proxy_count << ',' << cell.lr_used
        << ',' << (cell.ok ? "ok" : "failed") << ',';
      if (cell.ok)
        f << cell.metrics.acc << ',' << cell.metrics.fm << ',' << cell.metrics.fw << ','
          << cell.metrics.mcc << ',' << cell.val_acc;
      else
        f << ",,,,";
      f << ',' << cell.epochs_run << ',' << cell.best_epoch << ',' << cell.wall_seconds << ','
        << cell.seconds_to_best << ',' << join_doubles(cell.histogram.mean_max_prob) << ','
        << join_ints(cell.effective_proxies_mode) << ',' << join_ints(cell.effective_proxies_soft)
        << ',' << cell.error << '\n';
    }
  }
  {
    std::ofstream f(fs::path(dir) / "aggregates.csv");
    if (!f) throw std::runtime_error("cannot write aggregates.csv in " + dir);
    f << "group,cells,mean_acc,sd_acc,mean_fm,sd_fm,mean_fw,sd_fw,mean_mcc,sd_mcc,"
         "mean_wall_seconds,mean_seconds_to_best\n";
    f.precision(10);
    for (const AggregateRow& row : report.aggregates)
      f << row.group << ',' << row.cells << ',' << row.mean.acc << ',' << row.sd.acc << ','
        << row.mean.fm << ',' << row.sd.fm << ',' << row.mean.fw << ',' << row.sd.fw << ','
        << row.mean.mcc << ',' << row.sd.mcc << ',' << row.mean_wall_seconds << ','
        << row.mean_seconds_to_best << '\n';
  }
  if (!cell_artifacts) return;
  for (const RunCell& cell : report.cells) {
    if (!cell.ok) continue;
    const fs::path cdir = fs::path(dir) / "cells" / cell_dir_name(cell);
    fs::create_directories(cdir);
    for (std::size_t m = 0; m < cell.test_outputs.size(); ++m)
      save_matrix(cell.test_outputs[m],
                  (cdir / ("outputs_m" + std::to_string(m + 1) + ".mat")).string());
    for (std::size_t m = 0; m < cell.trained_proxies.size(); ++m)
      save_matrix(cell.trained_proxies[m],
                  (cdir / ("proxies_m" + std::to_string(m + 1) + ".mat")).string());
    write_histogram_csv(cell.histogram, (cdir / "histogram.csv").string());
    write_confidence_csv(cell.histogram, (cdir / "confidence.csv").string());
  }
}

void dump_outputs(const TrainedModel& model, const SplitData& split, int histogram_class,
                  const std::string& dir) {
  fs::create_directories(dir);
  const ModalityOutputs outputs = model_outputs(model, split.features);
  for (std::size_t m = 0; m < outputs.size(); ++m)
    save_matrix(outputs[m],
                (fs::path(dir) / ("outputs_m" + std::to_string(m + 1) + ".mat")).string());
  if (model.cfg.method.kind == MethodSpec::Kind::MultiModal) {
    for (std::size_t m = 0; m < model.bank.w.size(); ++m)
      save_matrix(model.bank.w[m],
                  (fs::path(dir) / ("proxies_m" + std::to_string(m + 1) + ".mat")).string());
  } else if (model.cfg.method.kind == MethodSpec::Kind::SoftTriple) {
    save_matrix(model.st_proxies, (fs::path(dir) / "proxies_m1.mat").string());
  }
  const int hist_class = std::max(0, std::min(histogram_class, model.classes - 1));
  const PredictionHistogram h = prediction_histogram(outputs, split.labels, hist_class);
  write_histogram_csv(h, (fs::path(dir) / "histogram.csv").string());
  write_confidence_csv(h, (fs::path(dir) / "confidence.csv").string());
  nlohmann::json meta{{"rows", split.size()},
                      {"modalities", outputs.size()},
                      {"classes", model.classes},
                      {"method", model.cfg.method.label()},
                      {"histogram_class", hist_class}};
  std::ofstream f(fs::path(dir) / "dump.json");
  if (!f) throw std::runtime_error("cannot write dump.json in " + dir);
  f << meta.dump(2) << "\n";
}

}  // namespace mml
