#include "mml/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mml {

void AdamState::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      m_[b].assign(params[b].size, 0.0);
      v_[b].assign(params[b].size, 0.0);
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("adam: parameter block count changed between steps");

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

  for (std::size_t b = 0; b < params.size(); ++b) {
    const ParamRef& p = params[b];
    if (m_[b].size() != p.size)
      throw std::invalid_argument("adam: block size changed: " + p.name);
    for (std::size_t j = 0; j < p.size; ++j) {
      double g = p.grad[j];
      if (!std::isfinite(g))
        throw std::runtime_error("adam: non-finite gradient in block " + p.name);
      g += cfg_.weight_decay * p.value[j];
      m_[b][j] = cfg_.beta1 * m_[b][j] + (1.0 - cfg_.beta1) * g;
      v_[b][j] = cfg_.beta2 * v_[b][j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[b][j] / bc1;
      const double vhat = v_[b][j] / bc2;
      p.value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamState::restore(std::int64_t step, std::vector<std::vector<double>> m,
                        std::vector<std::vector<double>> v) {
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace mml
