#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mml {

// softmax(v, scale)_j = exp(v_j/scale) / sum_j' exp(v_j'/scale),
// max-subtracted so huge inputs cannot overflow.
std::vector<double> softmax(const std::vector<double>& v, double scale = 1.0);

// In-place variant over a raw range; the training hot path uses this.
void softmax_inplace(double* v, std::size_t n, double scale = 1.0);

// log sum_j exp(v_j), max-subtracted.
double log_sum_exp(const double* v, std::size_t n);
double log_sum_exp(const std::vector<double>& v);

struct FiniteDiffConfig {
  double step = 1e-5;       // central-difference step
  double tolerance = 1e-6;  // relative-error bound for checks built on top
};

// Central differences (f(x+h e_j) - f(x-h e_j)) / 2h for every coordinate.
// O(h^2) truncation error, which is what makes the 1e-6 check tolerance
// reachable in doubles.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& theta,
                                     const FiniteDiffConfig& cfg = {});

// max_j |a_j - b_j| / max(1, |a_j|); the convention every gradient check
// in this project uses (a = analytic, b = numeric).
double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric);

}  // namespace mml
