// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "cam/error.hpp"

namespace cam {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// log(1 - exp(x)) for x < 0.
double log1mexp(double x) {
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Marsaglia-Tsang for shape >= 1, returned on the log scale. Shape < 1 uses
// the boost G(a) = G(a+1) * U^(1/a), also on the log scale.
double log_standard_gamma(RngStream& rng, double shape) {
  if (shape < 1.0) {
    return log_standard_gamma(rng, shape + 1.0) + std::log(rng.uniform()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ParameterError(std::string(what) + " must be positive and finite, got " +
                         std::to_string(value));
  }
}

constexpr double kTailCut = 5.0;

double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
double lower_tail(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Standard normal restricted to [a, b) with a >= kTailCut.
double right_tail_normal(RngStream& rng, double a, double b) {
  if (b - a < 1.0 / a) {
    // Narrow far-tail interval: uniform proposal, acceptance >= exp(-(b-a)(b+a)/2).
    for (;;) {
      const double x = rng.uniform(a, b);
      if (std::log(rng.uniform()) <= -0.5 * (x - a) * (x + a)) return x;
    }
  }
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a - std::log(rng.uniform()) / lambda;
    if (x >= b) continue;
    const double diff = x - lambda;
    if (std::log(rng.uniform()) <= -0.5 * diff * diff) return x;
  }
}

double standard_truncated_normal(RngStream& rng, double a, double b) {
  if (a >= kTailCut) return right_tail_normal(rng, a, b);
  if (b <= -kTailCut) return -right_tail_normal(rng, -b, -a);

  if (a >= 0.0) {
    const double qa = upper_tail(a);
    const double qb = upper_tail(b);
    const double mass = qa - qb;
    if (!(mass > 0.0)) return a;
    const double q = qa - rng.uniform() * mass;
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  }
  const double pa = lower_tail(a);
  const double pb = lower_tail(b);
  const double mass = pb - pa;
  if (!(mass > 0.0)) return a;
  const double p = pa + rng.uniform() * mass;
  if (p > 0.5) {
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

RngStream RngStream::split(std::uint64_t index) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

double RngStream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  const double x = lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  return x < hi ? x : std::nextafter(hi, lo);
}

std::size_t RngStream::uniform_index(std::size_t n) {
  // Rejection sampling keeps the mapping unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u;
  double v;
  double s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

double draw_gamma(RngStream& rng, double shape, double rate) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  return std::exp(log_standard_gamma(rng, shape)) / rate;
}

double draw_inverse_gamma(RngStream& rng, double shape, double scale) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(scale, "inverse-gamma scale");
  return scale * std::exp(-log_standard_gamma(rng, shape));
}

LogStick draw_log_beta(RngStream& rng, double a, double b) {
  require_positive(a, "beta shape a");
  require_positive(b, "beta shape b");
  if (a == 1.0) {
    // 1 - V = U^(1/b)
    const double l1mv = std::log(rng.uniform()) / b;
    return {log1mexp(l1mv), l1mv};
  }
  if (b == 1.0) {
    const double lv = std::log(rng.uniform()) / a;
    return {lv, log1mexp(lv)};
  }
  const double lx = log_standard_gamma(rng, a);
  const double ly = log_standard_gamma(rng, b);
  const double lsum = log_add_exp(lx, ly);
  return {lx - lsum, ly - lsum};
}

double draw_beta(RngStream& rng, double a, double b) {
  const LogStick s = draw_log_beta(rng, a, b);
  const double v = std::exp(s.log_v);
  if (v >= 1.0) return std::nextafter(1.0, 0.0);
  if (v <= 0.0) return std::numeric_limits<double>::denorm_min();
  return v;
}

double draw_normal(RngStream& rng, double mean, double sd) {
  require_positive(sd, "normal sd");
  return mean + sd * rng.normal();
}

std::vector<double> draw_gem(RngStream& rng, double concentration, int count) {
  require_positive(concentration, "GEM concentration");
  if (count < 1) throw ParameterError("GEM count must be >= 1");
  std::vector<double> weights(static_cast<std::size_t>(count));
  double log_rest = 0.0;
  for (auto& w : weights) {
    const LogStick s = draw_log_beta(rng, 1.0, concentration);
    w = std::exp(log_rest + s.log_v);
    log_rest += s.log_1mv;
  }
  return weights;
}

double draw_truncated_normal(RngStream& rng, double mean, double sd, double lo, double hi) {
  require_positive(sd, "truncated normal sd");
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi)) {
    throw ParameterError("truncated normal requires lo < hi");
  }
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double x = mean + sd * standard_truncated_normal(rng, a, b);
  // Rounding in the affine map can land a hair outside the cell.
  if (x < lo) x = lo;
  if (x >= hi) x = std::nextafter(hi, lo);
  return x;
}

NigDraw draw_nig(RngStream& rng, double m0, double k0, double a0, double b0) {
  require_positive(k0, "NIG k0");
  const double sigma2 = draw_inverse_gamma(rng, a0, b0);
  const double mu = m0 + std::sqrt(sigma2 / k0) * rng.normal();
  return {mu, sigma2};
}

std::size_t draw_categorical_log(RngStream& rng, std::span<const double> logweights) {
  if (logweights.empty()) throw ParameterError("categorical draw over an empty support");
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : logweights) {
    if (std::isnan(lw)) throw NumericError("NaN log-weight in categorical draw");
    max_lw = std::max(max_lw, lw);
  }
  if (max_lw == -std::numeric_limits<double>::infinity()) {
    throw ParameterError("categorical draw over an empty support (all log-weights -inf)");
  }
  if (max_lw == std::numeric_limits<double>::infinity()) {
    throw NumericError("infinite log-weight in categorical draw");
  }
  double total = 0.0;
  for (double lw : logweights) total += std::exp(lw - max_lw);
  double target = rng.uniform() * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < logweights.size(); ++i) {
    const double w = std::exp(logweights[i] - max_lw);
    if (w > 0.0) last_positive = i;
    if (target < w) return i;
    target -= w;
  }
  return last_positive;
}

}  // namespace cam
