#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace hieum {

// Deterministic random source. Distributions are implemented here rather than
// through <random> distributions so sequences do not depend on the standard
// library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent sub-stream for a named consumer ("data", "init", "crops", ...).
  static Rng stream(std::uint64_t seed, std::string_view name);
  static std::uint64_t derive(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Inclusive on both ends.
  int uniform_int(int lo, int hi);
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      const auto j = static_cast<decltype(i)>(next() % static_cast<std::uint64_t>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace hieum
