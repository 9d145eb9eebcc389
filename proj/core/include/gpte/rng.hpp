#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gpte {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is pinned by the C++ standard, and every derived draw (uniform
// doubles, normals, shuffles) is implemented here rather than with the
// distribution classes, which are allowed to differ between standard
// libraries. State round-trips through text for checkpointing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream derived from (seed, stream), e.g. per-epoch shuffles.
  static Rng from_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double();

  // Normal draw via the Marsaglia polar method. No spare value is cached, so
  // the full state is the engine state.
  double normal(double mean = 0.0, double stddev = 1.0);

  // Uniform in [0, n); rejection-sampled to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t n);

  // In-place Fisher-Yates shuffle with a fixed traversal order.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gpte
