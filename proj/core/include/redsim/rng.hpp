#pragma once

#include <cstdint>
#include <random>

namespace redsim {

// SplitMix64 finalizer. Used to derive statistically independent substream
// seeds from a (root seed, stream id) pair.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed of substream `stream_id` under `root_seed`. Nested splits (e.g. a
// replication of a path of a design point) chain this function.
std::uint64_t substream_seed(std::uint64_t root_seed, std::uint64_t stream_id) noexcept;

// A single reproducible random stream. Every draw method documents how many
// engine outputs it consumes so that replay is exact.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static RandomStream substream(std::uint64_t root_seed, std::uint64_t stream_id) {
    return RandomStream(substream_seed(root_seed, stream_id));
  }

  // Uniform on [0, 1) with 53 random bits; consumes exactly one engine output.
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  // Exp(1) by inversion; consumes one uniform.
  double exponential() noexcept;

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace redsim
