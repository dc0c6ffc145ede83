#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cibhash {

/// Mixes a base seed with a list of tags (epoch, batch, view, ...) into an
/// independent 64-bit seed. Used to partition random streams so that any
/// unit of work can be replayed on its own.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

/// Seeded random stream. All randomness in the library flows through one of
/// these; two streams built from the same seed yield identical sequences.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return unit_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cibhash
