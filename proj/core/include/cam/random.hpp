// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_RANDOM_HPP
#define CAM_RANDOM_HPP

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace cam {

/// Seeded source of randomness owned by exactly one chain or task.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard; every variate algorithm on top of it lives in this module, so a
/// seed reproduces the same draws on any conforming platform. The algorithm
/// set is versioned through kAlgorithmVersion and echoed in run metadata.
class RngStream {
 public:
  static constexpr int kAlgorithmVersion = 1;

  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  /// Deterministic child stream, independent of how much this stream has been used.
  RngStream split(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on {0, ..., n-1}.
  std::size_t uniform_index(std::size_t n);

  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Log-space Beta draw: both log(v) and log(1 - v), each computed without
/// cancellation so sticks arbitrarily close to 0 or 1 stay usable.
struct LogStick {
  double log_v;
  double log_1mv;
};

double draw_gamma(RngStream& rng, double shape, double rate);
double draw_inverse_gamma(RngStream& rng, double shape, double scale);
double draw_beta(RngStream& rng, double a, double b);
LogStick draw_log_beta(RngStream& rng, double a, double b);

double draw_normal(RngStream& rng, double mean, double sd);

/// First `count` GEM(concentration) weights; their sum is strictly below one.
std::vector<double> draw_gem(RngStream& rng, double concentration, int count);

/// N(mean, sd^2) restricted to [lo, hi); lo may be -inf and hi +inf.
double draw_truncated_normal(RngStream& rng, double mean, double sd, double lo, double hi);

struct NigDraw {
  double mu;
  double sigma2;
};

/// sigma2 ~ InvGamma(a0, b0), mu | sigma2 ~ N(m0, sigma2 / k0).
NigDraw draw_nig(RngStream& rng, double m0, double k0, double a0, double b0);

/// Index drawn with probability proportional to exp(logweights[i]).
std::size_t draw_categorical_log(RngStream& rng, std::span<const double> logweights);

}  // namespace cam

#endif  // CAM_RANDOM_HPP
