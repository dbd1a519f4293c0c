#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mml/losses.hpp"

namespace mml {

// C x C count matrix, rows = true class, cols = predicted class.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes_)
      : classes(classes_), counts(static_cast<std::size_t>(classes_) * classes_, 0) {}

  static ConfusionMatrix from_predictions(const std::vector<int>& truth,
                                          const std::vector<int>& predicted, int classes);

  std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * classes + p]; }
  std::int64_t at(int t, int p) const { return counts[static_cast<std::size_t>(t) * classes + p]; }
  std::int64_t total() const;
};

// trace / total
double accuracy(const ConfusionMatrix& cm);

struct F1Scores {
  double macro = 0.0;     // unweighted mean of per-class F1
  double weighted = 0.0;  // support-weighted mean
  std::vector<double> per_class;
};

// Per-class F1 = 2PR/(P+R), 0 when P+R = 0; macro includes zero-support
// classes.
F1Scores f1_scores(const ConfusionMatrix& cm);

// Gorodkin multiclass Matthews correlation; 0 when either marginal variance
// vanishes. Equals the classical binary formula for C = 2.
double mcc(const ConfusionMatrix& cm);

struct ClassificationMetrics {
  double acc = 0.0, fm = 0.0, fw = 0.0, mcc = 0.0;
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

// Per-(modality, true label) binned counts of the predicted probability of
// one designated class; bins of width 0.1 over [0,1], first bin [0, 0.1],
// then right-closed. Also carries the mean maximum-class probability per
// modality, the confidence summary the entropy checks use.
struct PredictionHistogram {
  static constexpr int kBins = 10;
  int classes = 0;
  int class_of_interest = 0;
  // counts[modality][true_label][bin]
  std::vector<std::vector<std::array<std::int64_t, kBins>>> counts;
  std::vector<double> mean_max_prob;  // per modality
};

PredictionHistogram prediction_histogram(const ModalityOutputs& outputs,
                                         const std::vector<int>& labels, int class_of_interest);

}  // namespace mml
