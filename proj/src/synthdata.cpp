#include "mml/synthdata.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mml/json_io.hpp"
#include "mml/rng.hpp"

namespace mml {

namespace {

void validate(const SynthConfig& cfg) {
  if (cfg.n_modalities < 1) throw std::invalid_argument("synth: n_modalities must be >= 1");
  if (cfg.dim < 1) throw std::invalid_argument("synth: dim must be >= 1");
  if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1)
    throw std::invalid_argument("synth: split sizes must be >= 1");
  if (cfg.sparsity < 1 || cfg.sparsity > cfg.dim)
    throw std::invalid_argument("synth: sparsity must be in [1, dim]");
  if (cfg.beta_sd < 0.0 || cfg.epsilon_sd < 0.0)
    throw std::invalid_argument("synth: negative scale");
  if (cfg.sigma.size() != static_cast<std::size_t>(cfg.n_modalities))
    throw std::invalid_argument("synth: sigma needs one entry per modality");
  for (double s : cfg.sigma)
    if (s < 0.0) throw std::invalid_argument("synth: sigma entries must be >= 0");
}

// label view of one modality draw: 1 iff sigmoid(score) > 0.5, ties to 0
inline int view_label(double score) { return score > 0.0 ? 1 : 0; }

// Draw order per try: support coords of m (ascending), support coords of e
// (ascending), then eps. The non-support feature coords are only drawn for
// the accepted try, so rejections stay cheap.
struct ModalityDraw {
  std::vector<double> m_support;
  int label;
};

ModalityDraw draw_view(Rng& rng, const std::vector<double>& beta_vals, double sigma,
                       double epsilon_sd) {
  ModalityDraw d;
  d.m_support.resize(beta_vals.size());
  double score = 0.0;
  for (std::size_t t = 0; t < beta_vals.size(); ++t) {
    d.m_support[t] = rng.normal();
    score += d.m_support[t] * beta_vals[t];
  }
  for (std::size_t t = 0; t < beta_vals.size(); ++t) score += sigma * rng.normal() * beta_vals[t];
  score += epsilon_sd * rng.normal();
  d.label = view_label(score);
  return d;
}

constexpr int kMaxTries = 4096;  // escape hatch for degenerate configs

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  validate(cfg);
  SynthDataset ds;
  ds.config = cfg;
  Rng rng(cfg.seed);

  const int M = cfg.n_modalities;
  // one sparse coefficient vector per modality: support sampled without
  // replacement, values N(0, beta_sd^2)
  ds.beta.assign(M, std::vector<double>(cfg.dim, 0.0));
  ds.beta_support.resize(M);
  std::vector<std::vector<double>> beta_vals(M);
  std::vector<std::vector<char>> on_support(M, std::vector<char>(cfg.dim, 0));
  for (int j = 0; j < M; ++j) {
    std::vector<std::size_t> coords(cfg.dim);
    for (int t = 0; t < cfg.dim; ++t) coords[t] = t;
    for (int t = 0; t < cfg.sparsity; ++t) {
      const std::size_t pick = t + rng.below(cfg.dim - t);
      std::swap(coords[t], coords[pick]);
    }
    ds.beta_support[j].assign(coords.begin(), coords.begin() + cfg.sparsity);
    std::sort(ds.beta_support[j].begin(), ds.beta_support[j].end());
    beta_vals[j].resize(cfg.sparsity);
    for (int t = 0; t < cfg.sparsity; ++t) {
      beta_vals[j][t] = rng.normal(0.0, cfg.beta_sd);
      ds.beta[j][ds.beta_support[j][t]] = beta_vals[j][t];
      on_support[j][ds.beta_support[j][t]] = 1;
    }
  }

  auto fill_split = [&](SplitData& split, int n) {
    split.features.assign(M, Matrix(n, cfg.dim));
    split.labels.resize(n);
    for (int i = 0; i < n; ++i) {
      int y = 0;
      for (int j = 0; j < M; ++j) {
        ModalityDraw d = draw_view(rng, beta_vals[j], cfg.sigma[j], cfg.epsilon_sd);
        if (j == 0) {
          y = d.label;  // modality 1's view defines the shared label
        } else {
          int tries = 1;
          while (d.label != y && tries < kMaxTries) {
            d = draw_view(rng, beta_vals[j], cfg.sigma[j], cfg.epsilon_sd);
            ++tries;
          }
        }
        double* row = split.features[j].row(i);
        for (int t = 0; t < cfg.sparsity; ++t) row[ds.beta_support[j][t]] = d.m_support[t];
        for (int t = 0; t < cfg.dim; ++t)
          if (!on_support[j][t]) row[t] = rng.normal();
      }
      split.labels[i] = y;
    }
  };

  fill_split(ds.train, cfg.n_train);
  fill_split(ds.val, cfg.n_val);
  fill_split(ds.test, cfg.n_test);
  return ds;
}

std::vector<double> label_balance(const SynthDataset& ds) {
  auto frac = [](const SplitData& s) {
    double pos = 0.0;
    for (int y : s.labels) pos += y;
    return pos / static_cast<double>(s.labels.size());
  };
  return {frac(ds.train), frac(ds.val), frac(ds.test)};
}

namespace {

const char* kSplitNames[3] = {"train", "val", "test"};

}  // namespace

void save_dataset(const SynthDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const SplitData* splits[3] = {&ds.train, &ds.val, &ds.test};
  nlohmann::json manifest;
  manifest["format"] = "mml-dataset-v1";
  manifest["config"] = ds.config;
  manifest["beta"] = ds.beta;
  manifest["beta_support"] = ds.beta_support;
  for (int s = 0; s < 3; ++s) {
    for (int j = 0; j < ds.config.n_modalities; ++j) {
      const std::string name =
          std::string(kSplitNames[s]) + "_m" + std::to_string(j + 1) + ".mat";
      save_matrix(splits[s]->features[j], (fs::path(dir) / name).string());
    }
    save_labels(splits[s]->labels,
                (fs::path(dir) / (std::string(kSplitNames[s]) + "_labels.bin")).string());
  }
  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest in " + dir);
  f << manifest.dump(2) << "\n";
}

SynthDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw std::runtime_error("cannot read manifest in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(f);
  if (manifest.value("format", "") != "mml-dataset-v1")
    throw std::runtime_error("unknown dataset format in " + dir);
  SynthDataset ds;
  ds.config = manifest.at("config").get<SynthConfig>();
  ds.beta = manifest.at("beta").get<std::vector<std::vector<double>>>();
  ds.beta_support = manifest.at("beta_support").get<std::vector<std::vector<int>>>();
  SplitData* splits[3] = {&ds.train, &ds.val, &ds.test};
  for (int s = 0; s < 3; ++s) {
    splits[s]->features.resize(ds.config.n_modalities);
    for (int j = 0; j < ds.config.n_modalities; ++j) {
      const std::string name =
          std::string(kSplitNames[s]) + "_m" + std::to_string(j + 1) + ".mat";
      splits[s]->features[j] = load_matrix((fs::path(dir) / name).string());
    }
    splits[s]->labels =
        load_labels((fs::path(dir) / (std::string(kSplitNames[s]) + "_labels.bin")).string());
  }
  return ds;
}

}  // namespace mml
