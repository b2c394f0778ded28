#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace minto {

/// Named consumers of randomness. Each (seed, stream, substream) triple owns an
/// independent generator, so adding draws to one consumer never shifts another.
enum class StreamId : std::uint32_t {
  environment = 1,
  exploration = 2,
  combiner = 3,
  buffer = 4,
  init = 5,
  learner = 6,
  evaluation = 7,
  dataset = 8,
  bootstrap = 9,
  property = 10,
};

std::string_view stream_name(StreamId id);

/// xoshiro256** seeded through splitmix64 from (seed, stream, substream).
/// Only integer arithmetic is used for state evolution and all derived
/// distributions are implemented here, so sequences are identical across
/// standard libraries and platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamId stream, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  bool bernoulli(double p);
  /// Standard normal via Box-Muller (one output per call, two uniforms consumed).
  double normal();
  double normal(double mean, double stddev);
  /// Index drawn from an unnormalized non-negative weight vector.
  std::size_t categorical(std::span<const double> weights);

  std::uint64_t seed() const { return seed_; }
  StreamId stream() const { return stream_; }
  std::uint64_t substream() const { return substream_; }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_;
  StreamId stream_;
  std::uint64_t substream_;
};

}  // namespace minto
