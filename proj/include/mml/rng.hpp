#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mml {

// xoshiro256++ (Blackman & Vigna), state seeded through splitmix64 so any
// 64-bit seed gives a well-mixed stream. Same seed => same sequence on every
// platform; seeds are meaningful within this artifact only.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // uniform double in [0, 1), 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller; generates pairs, caches the second
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // unbiased integer in [0, n) by rejection
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates
  void shuffle(std::vector<std::size_t>& v);

  // serializable state: 4 state words + cached normal
  struct State {
    std::array<std::uint64_t, 4> s;
    bool has_spare;
    double spare;
  };
  State state() const { return {s_, has_spare_, spare_}; }
  void restore(const State& st) { s_ = st.s; has_spare_ = st.has_spare; spare_ = st.spare; }

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic substream derivation: FNV-1a over the tag folded into the
// base seed via splitmix64. Used to give every experiment cell its own
// independent stream.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace mml
