#include "minto/rng.hpp"

#include <cmath>
#include <numbers>

#include "minto/error.hpp"

namespace minto {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::string_view stream_name(StreamId id) {
  switch (id) {
    case StreamId::environment: return "environment";
    case StreamId::exploration: return "exploration";
    case StreamId::combiner: return "combiner";
    case StreamId::buffer: return "buffer";
    case StreamId::init: return "init";
    case StreamId::learner: return "learner";
    case StreamId::evaluation: return "evaluation";
    case StreamId::dataset: return "dataset";
    case StreamId::bootstrap: return "bootstrap";
    case StreamId::property: return "property";
  }
  return "unknown";
}

RngStream::RngStream(std::uint64_t seed, StreamId stream, std::uint64_t substream)
    : seed_(seed), stream_(stream), substream_(substream) {
  // Mix the three coordinates sequentially so that neighbouring seeds and
  // stream ids land far apart in state space.
  std::uint64_t x = seed;
  std::uint64_t k = splitmix64(x);
  x = k ^ (static_cast<std::uint64_t>(stream) * 0xd1342543de82ef95ULL);
  k = splitmix64(x);
  x = k ^ (substream * 0xa0761d6478bd642fULL + 0x2545f4914f6cdd1dULL);
  for (auto& word : s_) word = splitmix64(x);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  require(n > 0, "uniform_int: n must be positive");
  // Lemire's multiply-shift with rejection of the biased low range.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

bool RngStream::bernoulli(double p) { return uniform() < p; }

double RngStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double stddev) { return mean + stddev * normal(); }

std::size_t RngStream::categorical(std::span<const double> weights) {
  require(!weights.empty(), "categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) total += w;
  require(total > 0.0, "categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace minto
