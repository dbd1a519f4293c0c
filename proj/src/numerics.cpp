#include "mml/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mml {

namespace {

// exp() arguments below this produce subnormals, which are both worthless at
// our tolerances and extremely slow on x86; flush them to an exact zero
constexpr double kExpFloor = -708.0;

inline double floored_exp(double t) { return t < kExpFloor ? 0.0 : std::exp(t); }

}  // namespace

void softmax_inplace(double* v, std::size_t n, double scale) {
  if (scale <= 0.0 || !std::isfinite(scale)) throw std::invalid_argument("invalid scale");
  if (n == 0) throw std::invalid_argument("softmax of empty vector");
  double mx = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(v[j])) throw std::invalid_argument("non-finite input");
    mx = std::max(mx, v[j] / scale);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    v[j] = floored_exp(v[j] / scale - mx);
    sum += v[j];
  }
  for (std::size_t j = 0; j < n; ++j) v[j] /= sum;
}

std::vector<double> softmax(const std::vector<double>& v, double scale) {
  std::vector<double> out = v;
  softmax_inplace(out.data(), out.size(), scale);
  return out;
}

double log_sum_exp(const double* v, std::size_t n) {
  if (n == 0) throw std::invalid_argument("log_sum_exp of empty vector");
  double mx = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(v[j])) throw std::invalid_argument("non-finite input");
    mx = std::max(mx, v[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += floored_exp(v[j] - mx);
  return mx + std::log(sum);
}

double log_sum_exp(const std::vector<double>& v) { return log_sum_exp(v.data(), v.size()); }

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& theta,
                                     const FiniteDiffConfig& cfg) {
  if (cfg.step <= 0.0) throw std::invalid_argument("finite-difference step must be > 0");
  std::vector<double> grad(theta.size());
  std::vector<double> point = theta;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    point[j] = theta[j] + cfg.step;
    const double fp = f(point);
    point[j] = theta[j] - cfg.step;
    const double fm = f(point);
    point[j] = theta[j];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite evaluation at coordinate " +
                               std::to_string(j));
    grad[j] = (fp - fm) / (2.0 * cfg.step);
  }
  return grad;
}

double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size())
    throw std::invalid_argument("max_rel_err: length mismatch");
  double worst = 0.0;
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    const double denom = std::max(1.0, std::fabs(analytic[j]));
    worst = std::max(worst, std::fabs(analytic[j] - numeric[j]) / denom);
  }
  return worst;
}

}  // namespace mml
