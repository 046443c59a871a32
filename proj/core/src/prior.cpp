// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/prior.hpp"

#include <cmath>
#include <map>

#include "cam/error.hpp"

namespace cam {

namespace {

void require_concentration(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ParameterError("concentration must be positive");
}

double covariance_coefficient(double alpha, double beta) {
  const double q1 = prob_equal_distributions(alpha);
  return q1 / (1.0 + beta) + (1.0 - q1) / (1.0 + 2.0 * beta);
}

// Depth-truncated GEM weights generated on demand. The final position carries
// the remaining stick mass, so the weights always sum to one.
class LazyGem {
 public:
  LazyGem(double concentration, int depth) : concentration_(concentration), depth_(depth) {}

  double weight(int index, RngStream& rng) {
    extend_to(index, rng);
    return index < static_cast<int>(weights_.size()) ? weights_[index] : 0.0;
  }

  int sample(RngStream& rng) {
    double u = rng.uniform();
    for (int k = 0;; ++k) {
      extend_to(k, rng);
      if (k >= static_cast<int>(weights_.size())) return static_cast<int>(weights_.size()) - 1;
      if (u < weights_[k] || (closed_ && k + 1 == static_cast<int>(weights_.size()))) return k;
      u -= weights_[k];
    }
  }

  const std::vector<double>& complete(RngStream& rng) {
    extend_to(depth_ - 1, rng);
    return weights_;
  }

 private:
  void extend_to(int index, RngStream& rng) {
    while (!closed_ && static_cast<int>(weights_.size()) <= index) {
      if (static_cast<int>(weights_.size()) == depth_ - 1 || rest_ < 1e-16) {
        weights_.push_back(rest_);
        closed_ = true;
        break;
      }
      const LogStick s = draw_log_beta(rng, 1.0, concentration_);
      weights_.push_back(rest_ * std::exp(s.log_v));
      rest_ *= std::exp(s.log_1mv);
    }
  }

  double concentration_;
  int depth_;
  double rest_ = 1.0;
  bool closed_ = false;
  std::vector<double> weights_;
};

// Weight vector of the (K, L)-truncated unit distribution: cluster index
// clamped to K, inner weights cut at L with the remainder on atom L.
double tv_to_truncation(const std::vector<double>& own, const std::vector<double>& target,
                        int L) {
  double tv = 0.0;
  double head = 0.0;
  const std::size_t n = std::max(own.size(), target.size());
  for (std::size_t l = 0; l < n; ++l) {
    const double w = l < own.size() ? own[l] : 0.0;
    double t = 0.0;
    if (static_cast<int>(l) < L - 1) {
      t = l < target.size() ? target[l] : 0.0;
      head += t;
    } else if (static_cast<int>(l) == L - 1) {
      // filled below once the head is known
      t = -1.0;
    }
    if (t >= 0.0) tv += std::abs(w - t);
  }
  const double last_target = std::max(0.0, 1.0 - head);
  const double last_own = static_cast<std::size_t>(L - 1) < own.size() ? own[L - 1] : 0.0;
  tv += std::abs(last_own - last_target);
  return 0.5 * tv;
}

}  // namespace

double prob_equal_distributions(double alpha) {
  require_concentration(alpha);
  return 1.0 / (1.0 + alpha);
}

double prob_tie_observations(double alpha, double beta) {
  require_concentration(alpha);
  require_concentration(beta);
  return (1.0 / (1.0 + alpha)) * (1.0 / (1.0 + beta) + alpha / (2.0 * beta + 1.0));
}

double correlation_same_set(double alpha, double beta) {
  require_concentration(alpha);
  require_concentration(beta);
  return 1.0 - (beta / (2.0 * beta + 1.0)) * (alpha / (1.0 + alpha));
}

double covariance_sets(double alpha, double beta, double H_A, double H_B, double H_AB) {
  require_concentration(alpha);
  require_concentration(beta);
  const bool consistent = H_A >= 0.0 && H_B >= 0.0 && H_A <= 1.0 && H_B <= 1.0 &&
                          H_AB >= 0.0 && H_AB <= std::min(H_A, H_B) &&
                          H_AB >= H_A + H_B - 1.0 - 1e-15;
  if (!consistent) throw ParameterError("inconsistent base-measure masses for covariance");
  return covariance_coefficient(alpha, beta) * (H_AB - H_A * H_B);
}

double truncation_bound_single(double alpha, double beta, int K, int L) {
  require_concentration(alpha);
  require_concentration(beta);
  if (K < 1 || L < 1) throw ParameterError("truncation levels must be >= 1");
  const double outer = std::pow(alpha / (1.0 + alpha), K);
  const double inner = std::pow(beta / (1.0 + beta), L);
  return (1.0 - outer) * inner + outer;
}

double truncation_bound_mixture(double alpha, double beta, int K, int L, long N) {
  require_concentration(alpha);
  require_concentration(beta);
  if (K < 1 || L < 1) throw ParameterError("truncation levels must be >= 1");
  if (N < 1) throw ParameterError("observation count must be >= 1");
  return static_cast<double>(N) *
         (std::pow(beta / (1.0 + beta), L) + std::pow(alpha / (1.0 + alpha), K));
}

PriorSummary prior_summary(double alpha, double beta) {
  const double c = covariance_coefficient(alpha, beta);
  return {prob_equal_distributions(alpha), prob_tie_observations(alpha, beta),
          correlation_same_set(alpha, beta), c, -c};
}

bool PriorCheckReport::all_passed() const {
  for (const auto& c : checks) {
    if (c.flagged) return false;
  }
  return true;
}

PriorCheckReport mc_verify_prior(double alpha, double beta, const PriorCheckOptions& options,
                                 RngStream& rng) {
  require_concentration(alpha);
  require_concentration(beta);
  if (options.reps < 2) throw ParameterError("need at least two replicates");
  if (options.depth < 2) throw ParameterError("depth must be >= 2");
  for (const auto& [K, L] : options.truncations) {
    if (K < 1 || L < 1 || K > options.depth || L > options.depth) {
      throw ParameterError("truncation levels must lie in [1, depth]");
    }
  }

  const auto n_trunc = options.truncations.size();
  double equal_hits = 0.0;
  double tie_hits = 0.0;
  // Correlation moments are kept per batch: the SE of rho comes from the
  // spread of batch estimates because G(A) is far from normal.
  constexpr long kBatches = 50;
  struct CorrSums {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    double rho() const {
      const double cov = sxy / n - (sx / n) * (sy / n);
      const double vx = sxx / n - (sx / n) * (sx / n);
      const double vy = syy / n - (sy / n) * (sy / n);
      return cov / std::sqrt(vx * vy);
    }
  };
  std::vector<CorrSums> corr(static_cast<std::size_t>(kBatches));
  std::vector<double> tv_sum(n_trunc, 0.0), tv_sq(n_trunc, 0.0);

  for (long r = 0; r < options.reps; ++r) {
    LazyGem outer(alpha, options.depth);
    std::map<int, LazyGem> inner;
    auto column = [&](int k) -> LazyGem& {
      return inner.try_emplace(k, beta, options.depth).first->second;
    };

    const int s1 = outer.sample(rng);
    const int s2 = outer.sample(rng);
    if (s1 == s2) equal_hits += 1.0;

    const int m1 = column(s1).sample(rng);
    const int m2 = column(s2).sample(rng);
    if (m1 == m2) tie_hits += 1.0;

    if (options.check_correlation) {
      // Atoms from N(0, 1) and A = (-inf, 0]: only the indicator of each atom matters.
      const auto& w1 = column(s1).complete(rng);
      const auto& w2 = column(s2).complete(rng);
      double g1 = 0.0;
      double g2 = 0.0;
      const std::size_t n = std::max(w1.size(), w2.size());
      for (std::size_t l = 0; l < n; ++l) {
        if (rng.uniform() < 0.5) {
          if (l < w1.size()) g1 += w1[l];
          if (l < w2.size()) g2 += w2[l];
        }
      }
      CorrSums& c = corr[static_cast<std::size_t>(r * kBatches / options.reps)];
      c.n += 1.0;
      c.sx += g1;
      c.sy += g2;
      c.sxx += g1 * g1;
      c.syy += g2 * g2;
      c.sxy += g1 * g2;
    }

    for (std::size_t t = 0; t < n_trunc; ++t) {
      const auto [K, L] = options.truncations[t];
      const auto& own = column(s1).complete(rng);
      const int target_cluster = std::min(s1, K - 1);
      const auto& target = column(target_cluster).complete(rng);
      const double d = tv_to_truncation(own, target, L);
      tv_sum[t] += d;
      tv_sq[t] += d * d;
    }
  }

  const double n = static_cast<double>(options.reps);
  PriorCheckReport report{alpha, beta, options.reps, options.depth, {}};
  auto add_two_sided = [&](std::string name, double analytic, double est, double se) {
    const bool flagged = std::abs(est - analytic) > options.flag_sigmas * se;
    report.checks.push_back({std::move(name), analytic, est, se, false, flagged});
  };

  const double p_eq = equal_hits / n;
  add_two_sided("p_equal_G", prob_equal_distributions(alpha), p_eq,
                std::sqrt(std::max(p_eq * (1.0 - p_eq), 1e-300) / n));
  const double p_tie = tie_hits / n;
  add_two_sided("p_tie_obs", prob_tie_observations(alpha, beta), p_tie,
                std::sqrt(std::max(p_tie * (1.0 - p_tie), 1e-300) / n));
  if (options.check_correlation) {
    CorrSums all;
    std::vector<double> batch_rho;
    for (const CorrSums& c : corr) {
      all.n += c.n;
      all.sx += c.sx;
      all.sy += c.sy;
      all.sxx += c.sxx;
      all.syy += c.syy;
      all.sxy += c.sxy;
      if (c.n > 2.0) batch_rho.push_back(c.rho());
    }
    double m = 0.0;
    for (double x : batch_rho) m += x;
    m /= static_cast<double>(batch_rho.size());
    double ss = 0.0;
    for (double x : batch_rho) ss += (x - m) * (x - m);
    const double b = static_cast<double>(batch_rho.size());
    const double se = b > 1.0 ? std::sqrt(ss / (b - 1.0) / b) : 1.0;
    add_two_sided("rho_same_set", correlation_same_set(alpha, beta), all.rho(), se);
  }
  for (std::size_t t = 0; t < n_trunc; ++t) {
    const auto [K, L] = options.truncations[t];
    const double mean = tv_sum[t] / n;
    const double var = std::max(tv_sq[t] / n - mean * mean, 0.0);
    const double se = std::sqrt(var / n);
    const double bound = truncation_bound_single(alpha, beta, K, L);
    const bool flagged = mean - options.flag_sigmas * se > bound;
    report.checks.push_back({"dtv_K" + std::to_string(K) + "_L" + std::to_string(L), bound,
                             mean, se, true, flagged});
  }
  return report;
}

}  // namespace cam
