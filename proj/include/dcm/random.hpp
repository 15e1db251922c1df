#pragma once

#include <cstdint>
#include <random>

namespace dcm {

/// One SplitMix64 step: advances state and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of stream k: the first SplitMix64 output from state
/// master + (k + 1) * 0x9E3779B97F4A7C15. Streams are independent of
/// scheduling because they depend only on (master, k).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

/// Standard normal draws from an mt19937_64 engine.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
  double next() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace dcm
