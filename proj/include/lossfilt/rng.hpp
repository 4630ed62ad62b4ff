#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "lossfilt/gaussian.hpp"

namespace lossfilt {

/** splitmix64 step; used for seeding and for deriving sub-stream seeds. */
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/** Deterministic combination of a seed with a tag (trial index, stream id).
 *  Fixed algorithm so the same inputs give the same stream on any platform. */
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0x632be59bd9b4e019ull + tag);
  std::uint64_t a = splitmix64(s);
  s ^= tag * 0xff51afd7ed558ccdull;
  return a ^ splitmix64(s);
}

/** Self-contained xoshiro256++ stream with Box-Muller normals.
 *  Implemented here (not std::normal_distribution) because the output must be
 *  reproducible bit-for-bit for a given seed regardless of stdlib version.
 *  normal() consumes exactly two uniforms per call. */
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /** Uniform on [0, 1) with 53 random mantissa bits. */
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /** Standard normal draw (Box-Muller, cosine branch). */
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    constexpr double kTwoPi = 6.283185307179586477;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /** Bernoulli draw; returns 1 with probability p. */
  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

/** Draw x ~ N(mean, cov) for positive semidefinite cov. Uses a pivoted LDLT
 *  with negative pivots clamped to zero, so zero-variance components come out
 *  exact and cov == 0 yields the mean itself. Consumes dim(mean) normals. */
inline Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& cov,
                                       RngStream& rng) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d =
      ldlt.vectorD().cwiseMax(Eigen::VectorXd::Zero(mean.size()));
  Eigen::VectorXd y = d.cwiseSqrt().asDiagonal() * z;
  y = ldlt.matrixL() * y;
  return mean + ldlt.transpositionsP().transpose() * y;
}

inline Eigen::VectorXd sample_gaussian(const GaussianBelief& b,
                                       RngStream& rng) {
  return sample_gaussian(b.mean, b.cov, rng);
}

}  // namespace lossfilt
