#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mml {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 1e-6;
  bool pass = false;
  int instances = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass = false;
  double seconds = 0.0;
};

// Checks every analytic backward pass in the losses and model modules against
// central finite differences on random instances spanning batch <= 4,
// classes {2,3,5}, proxies {1,2,4}, modalities {1,2,3}. Relative error uses
// denominator max(1, |analytic|).
GradCheckReport run_gradient_checks(std::uint64_t seed = 0, int rounds = 2);

}  // namespace mml
