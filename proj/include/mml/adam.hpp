#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mml {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled L2: added to the gradient
};

// A named view of one trainable block and its gradient; blocks must be passed
// in the same order on every step.
struct ParamRef {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  std::size_t size = 0;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  // Standard bias-corrected Adam update. Weight decay enters as an additive
  // lambda*theta gradient term before the moment updates.
  void step(const std::vector<ParamRef>& params);

  // serialization surface for checkpoints
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::int64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace mml
