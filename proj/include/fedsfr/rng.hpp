#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace fedsfr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic random stream with value-semantics state: copying a stream
/// snapshots it, so the same draws can be replayed.
///
/// All conversions from raw bits are done by hand so results do not depend
/// on the standard library's distribution implementations.
class RngStream {
 public:
  RngStream() : gen_(0) {}
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % bound);
  }

  /// Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Laplace(0, scale) by inverse CDF; scale == 0 yields exact zeros.
  double laplace(double scale) {
    if (scale == 0.0) {
      next_u64();  // keep draw count independent of the scale
      return 0.0;
    }
    const double u = uniform() - 0.5;
    double t = 1.0 - 2.0 * std::abs(u);
    if (t <= 0.0) t = 0x1.0p-53;
    const double mag = -scale * std::log(t);
    return u < 0.0 ? -mag : mag;
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

/// Derives an independent named stream from a root seed and a tag path.
/// Streams derived with distinct tags never share state, which is what makes
/// client-parallel execution reproducible.
inline RngStream derive_stream(std::uint64_t root,
                               std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = root ^ 0x6a09e667f3bcc909ull;
  splitmix64(s);
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  return RngStream(splitmix64(s));
}

// Tag constants for the stream tree.
namespace stream_tag {
constexpr std::uint64_t kData = 1;
constexpr std::uint64_t kEvalData = 2;
constexpr std::uint64_t kInit = 3;
constexpr std::uint64_t kSample = 4;
constexpr std::uint64_t kClientTrain = 5;
constexpr std::uint64_t kCompress = 6;
constexpr std::uint64_t kFeatures = 7;
constexpr std::uint64_t kServer = 8;
constexpr std::uint64_t kEval = 9;
constexpr std::uint64_t kFrProbe = 10;
constexpr std::uint64_t kGradProbe = 11;
constexpr std::uint64_t kDp = 12;
constexpr std::uint64_t kPartition = 13;
constexpr std::uint64_t kPublic = 14;
}  // namespace stream_tag

}  // namespace fedsfr
