#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mml/dataset.hpp"

namespace mml {

struct SynthConfig {
  int n_modalities = 3;
  int dim = 2000;
  int n_train = 10000;
  int n_val = 1000;
  int n_test = 10000;
  int sparsity = 20;        // non-zero coefficients per modality
  double beta_sd = 2.0;     // coefficient scale
  std::vector<double> sigma = {0.2, 0.2, 0.2};  // per-modality noise level
  double epsilon_sd = 1.0;  // label-noise scale
  std::uint64_t seed = 0;
};

// Two-class multimodal benchmark. Features of modality j are a clean
// N(0,1)^dim draw; its view of the label is the thresholded logistic score
// (m + sigma_j * e) . beta_j + eps with fresh e and eps per instance. One
// label is shared per instance: modality 1's view defines it and every other
// modality is redrawn until its own view matches, which makes the modalities
// conditionally independent given the label. A noisy modality (large sigma)
// therefore barely predicts the shared label while clean ones stay fully
// informative regardless of the others' noise.
struct SynthDataset {
  SynthConfig config;
  SplitData train, val, test;
  std::vector<std::vector<double>> beta;       // per modality, dense dim
  std::vector<std::vector<int>> beta_support;  // non-zero coordinates, ascending
};

SynthDataset generate(const SynthConfig& cfg);

// fraction of class-1 instances in train/val/test
std::vector<double> label_balance(const SynthDataset& ds);

// Columnar bundle: one matrix file per modality per split, one label file per
// split, manifest.json with the full config. Import reproduces byte-identical
// matrices.
void save_dataset(const SynthDataset& ds, const std::string& dir);
SynthDataset load_dataset(const std::string& dir);

}  // namespace mml
