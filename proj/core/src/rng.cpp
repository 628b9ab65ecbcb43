#include "redsim/rng.hpp"

#include <cmath>

namespace redsim {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t root_seed, std::uint64_t stream_id) noexcept {
  return splitmix64(splitmix64(root_seed) ^ splitmix64(~stream_id));
}

double RandomStream::exponential() noexcept {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform());
}

}  // namespace redsim
