#include "mml/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mml {

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<int>& truth,
                                                  const std::vector<int>& predicted,
                                                  int classes) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion matrix: label/prediction length mismatch");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes)
      throw std::invalid_argument("confusion matrix: class out of range at index " +
                                  std::to_string(i));
    ++cm.at(truth[i], predicted[i]);
  }
  return cm;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (std::int64_t c : counts) n += c;
  return n;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) throw std::invalid_argument("accuracy of empty confusion matrix");
  std::int64_t trace = 0;
  for (int c = 0; c < cm.classes; ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(n);
}

F1Scores f1_scores(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) throw std::invalid_argument("f1 of empty confusion matrix");
  F1Scores out;
  out.per_class.resize(cm.classes, 0.0);
  for (int c = 0; c < cm.classes; ++c) {
    std::int64_t tp = cm.at(c, c), row = 0, col = 0;
    for (int j = 0; j < cm.classes; ++j) {
      row += cm.at(c, j);  // support
      col += cm.at(j, c);  // predicted count
    }
    const double precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    const double recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    out.per_class[c] = f1;
    out.macro += f1 / static_cast<double>(cm.classes);
    out.weighted += f1 * static_cast<double>(row) / static_cast<double>(n);
  }
  return out;
}

double mcc(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) throw std::invalid_argument("mcc of empty confusion matrix");
  std::int64_t trace = 0;
  double tp_dot = 0.0, t2 = 0.0, p2 = 0.0;
  for (int c = 0; c < cm.classes; ++c) {
    trace += cm.at(c, c);
    std::int64_t t = 0, p = 0;
    for (int j = 0; j < cm.classes; ++j) {
      t += cm.at(c, j);
      p += cm.at(j, c);
    }
    tp_dot += static_cast<double>(t) * static_cast<double>(p);
    t2 += static_cast<double>(t) * static_cast<double>(t);
    p2 += static_cast<double>(p) * static_cast<double>(p);
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double cov = static_cast<double>(n) * static_cast<double>(trace) - tp_dot;
  const double var_t = nn - t2, var_p = nn - p2;
  if (var_t <= 0.0 || var_p <= 0.0) return 0.0;
  return cov / std::sqrt(var_t * var_p);
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  const F1Scores f1 = f1_scores(cm);
  return {accuracy(cm), f1.macro, f1.weighted, mcc(cm)};
}

PredictionHistogram prediction_histogram(const ModalityOutputs& outputs,
                                         const std::vector<int>& labels, int class_of_interest) {
  if (outputs.empty()) throw std::invalid_argument("prediction_histogram: no modalities");
  const std::size_t B = outputs[0].rows();
  const int C = static_cast<int>(outputs[0].cols());
  if (labels.size() != B)
    throw std::invalid_argument("prediction_histogram: label count mismatch");
  if (class_of_interest < 0 || class_of_interest >= C)
    throw std::invalid_argument("prediction_histogram: class of interest out of range");

  PredictionHistogram h;
  h.classes = C;
  h.class_of_interest = class_of_interest;
  h.counts.assign(outputs.size(), std::vector<std::array<std::int64_t, PredictionHistogram::kBins>>(
                                      C, std::array<std::int64_t, PredictionHistogram::kBins>{}));
  h.mean_max_prob.assign(outputs.size(), 0.0);

  for (std::size_t m = 0; m < outputs.size(); ++m) {
    for (std::size_t i = 0; i < B; ++i) {
      const double p = outputs[m](i, class_of_interest);
      // first bin [0, 0.1], then right-closed (lo, hi]
      int bin;
      if (p <= 0.1) {
        bin = 0;
      } else {
        bin = static_cast<int>(std::ceil(p * 10.0)) - 1;
        if (bin >= PredictionHistogram::kBins) bin = PredictionHistogram::kBins - 1;
      }
      ++h.counts[m][labels[i]][bin];
      double mx = outputs[m](i, 0);
      for (int c = 1; c < C; ++c) mx = std::max(mx, outputs[m](i, c));
      h.mean_max_prob[m] += mx;
    }
    h.mean_max_prob[m] /= static_cast<double>(B);
  }
  return h;
}

}  // namespace mml
