// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/conditionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cam/error.hpp"

namespace cam {

NigParams nig_posterior(const Hyperparameters& hyper, double n, double mean, double centred_ss) {
  if (n <= 0.0) return {hyper.m0, hyper.k0, hyper.a0, hyper.b0};
  const double k_post = hyper.k0 + n;
  const double m_post = (hyper.k0 * hyper.m0 + n * mean) / k_post;
  const double a_post = hyper.a0 + 0.5 * n;
  const double dev = mean - hyper.m0;
  const double b_post = hyper.b0 + 0.5 * (centred_ss + (hyper.k0 * n / k_post) * dev * dev);
  return {m_post, k_post, a_post, b_post};
}

AtomStats collect_atom_stats(const SamplerState& state, const Dataset& data, int num_atoms) {
  AtomStats stats;
  const auto L = static_cast<std::size_t>(num_atoms);
  stats.count.assign(L, 0.0);
  stats.mean.assign(L, 0.0);
  stats.centred_ss.assign(L, 0.0);
  for (std::size_t j = 0; j < data.units.size(); ++j) {
    for (std::size_t i = 0; i < data.units[j].size(); ++i) {
      const auto l = static_cast<std::size_t>(state.M[j][i]);
      if (l >= L) continue;
      const double w = working_value(state, data, j, i);
      // Welford
      stats.count[l] += 1.0;
      const double delta = w - stats.mean[l];
      stats.mean[l] += delta / stats.count[l];
      stats.centred_ss[l] += delta * (w - stats.mean[l]);
    }
  }
  return stats;
}

void update_atoms(SamplerState& state, const Dataset& data, const Hyperparameters& hyper,
                  int num_atoms, RngStream& rng) {
  const AtomStats stats = collect_atom_stats(state, data, num_atoms);
  state.theta.resize(static_cast<std::size_t>(num_atoms));
  for (std::size_t l = 0; l < state.theta.size(); ++l) {
    const NigParams p = nig_posterior(hyper, stats.count[l], stats.mean[l], stats.centred_ss[l]);
    if (!std::isfinite(p.m) || !std::isfinite(p.b)) {
      throw NumericError("non-finite posterior for atom " + std::to_string(l));
    }
    const NigDraw d = draw_nig(rng, p.m, p.k, p.a, p.b);
    state.theta[l] = {d.mu, d.sigma2};
  }
}

void update_latent(SamplerState& state, const Dataset& data, RngStream& rng,
                   const RoundingGrid& grid) {
  if (data.kind != DataKind::count) return;
  state.y_latent.resize(data.units.size());
  for (std::size_t j = 0; j < data.units.size(); ++j) {
    const double g = data.scale_of(j);
    const double shift = state.reg_coeff * data.covariate_of(j);
    state.y_latent[j].resize(data.units[j].size());
    for (std::size_t i = 0; i < data.units[j].size(); ++i) {
      const auto z = static_cast<long>(data.units[j][i]);
      const Atom& atom = state.theta[static_cast<std::size_t>(state.M[j][i])];
      state.y_latent[j][i] = draw_truncated_normal(rng, g * (atom.mu + shift),
                                                   g * std::sqrt(atom.sigma2), grid.lower(z),
                                                   grid.upper(z));
    }
  }
}

NormalParams regression_posterior(const SamplerState& state, const Dataset& data,
                                  const RegressionPrior& prior) {
  double r1 = 0.0;
  double r2 = 0.0;
  for (std::size_t j = 0; j < data.units.size(); ++j) {
    const double x = data.covariate_of(j);
    if (x == 0.0) continue;
    const double g = data.scale_of(j);
    for (std::size_t i = 0; i < data.units[j].size(); ++i) {
      const Atom& atom = state.theta[static_cast<std::size_t>(state.M[j][i])];
      const double y = data.kind == DataKind::count ? state.y_latent[j][i] : data.units[j][i];
      const double d = y / g - atom.mu;
      r1 += x * x / atom.sigma2;
      r2 += d * x / atom.sigma2;
    }
  }
  const double precision = prior.precision + r1;
  return {(prior.mean * prior.precision + r2) / precision, 1.0 / precision};
}

void update_regression(SamplerState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng) {
  if (!hyper.regression || !data.has_covariate()) return;
  const NormalParams p = regression_posterior(state, data, *hyper.regression);
  state.reg_coeff = draw_normal(rng, p.mean, std::sqrt(p.variance));
}

double escobar_west_mixture_weight(double a, double b, int k, double n, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  const double shape_low = a + k - 1.0;
  if (shape_low <= 0.0) return 1.0;
  const double odds = shape_low / (n * (b - std::log(eta)));
  return odds / (1.0 + odds);
}

double escobar_west_update(RngStream& rng, double current, double a, double b, int k, double n) {
  if (n <= 0.0) return draw_gamma(rng, a, b);
  const double eta = draw_beta(rng, current + 1.0, n);
  const double weight = escobar_west_mixture_weight(a, b, k, n, eta);
  const double rate = b - std::log(eta);
  const double shape = rng.uniform() < weight ? a + k : a + k - 1.0;
  return draw_gamma(rng, shape, rate);
}

double concentration_from_sticks(RngStream& rng, double a, double b, int num_sticks,
                                 double sum_log_1mv) {
  return draw_gamma(rng, a + num_sticks, b - sum_log_1mv);
}

namespace {

double log_beta_fn(double a, double b) {
  int sign = 0;
  return ::lgamma_r(a, &sign) + ::lgamma_r(b, &sign) - ::lgamma_r(a + b, &sign);
}

}  // namespace

double log_gem_predictive(std::span<const double> unit, std::span<const double> others, double beta,
                          int closed) {
  if (unit.size() != others.size()) throw ParameterError("label count vectors differ in length");
  int top = -1;
  double unit_tail = 0.0;
  double other_tail = 0.0;
  for (std::size_t l = 0; l < unit.size(); ++l) {
    if (unit[l] > 0.0) top = static_cast<int>(l);
    unit_tail += unit[l];
    other_tail += others[l];
  }
  const int stop = closed >= 0 ? std::min(top, closed - 1) : top;
  double out = 0.0;
  for (int l = 0; l <= stop; ++l) {
    const auto ll = static_cast<std::size_t>(l);
    unit_tail -= unit[ll];
    other_tail -= others[ll];
    out += log_beta_fn(1.0 + others[ll] + unit[ll], beta + other_tail + unit_tail) -
           log_beta_fn(1.0 + others[ll], beta + other_tail);
  }
  return out;
}

double slice_sample_concentration(RngStream& rng, double current, double shape, double rate,
                                  const std::function<double(double)>& log_lik) {
  if (!(current > 0.0) || !(shape > 0.0) || !(rate > 0.0)) throw ParameterError("invalid concentration state");
  // Density of x = log c, including the Jacobian.
  auto log_target = [&](double x) { return shape * x - rate * std::exp(x) + log_lik(std::exp(x)); };
  constexpr double kWidth = 1.0;
  constexpr int kMaxSteps = 50;
  const double x0 = std::log(current);
  const double level = log_target(x0) + std::log(rng.uniform());
  double lo = x0 - kWidth * rng.uniform();
  double hi = lo + kWidth;
  for (int i = 0; i < kMaxSteps && log_target(lo) > level; ++i) lo -= kWidth;
  for (int i = 0; i < kMaxSteps && log_target(hi) > level; ++i) hi += kWidth;
  for (;;) {
    const double x = rng.uniform(lo, hi);
    if (log_target(x) > level) return std::exp(x);
    if (x < x0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo < 1e-12) return current;
  }
}

void update_S_collapsed(SamplerState& state, int K, int L, double beta, int closed,
                        const std::function<double(std::size_t, int)>& log_prior, RngStream& rng) {
  const auto LL = static_cast<Eigen::Index>(L);
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(LL, K);
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(LL, static_cast<Eigen::Index>(state.S.size()));
  for (std::size_t j = 0; j < state.S.size(); ++j) {
    for (int m : state.M[j]) unit(m, static_cast<Eigen::Index>(j)) += 1.0;
    n.col(state.S[j]) += unit.col(static_cast<Eigen::Index>(j));
  }
  std::vector<double> lw(static_cast<std::size_t>(K));
  for (std::size_t j = 0; j < state.S.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    n.col(state.S[j]) -= unit.col(jj);
    const std::span<const double> cj(unit.col(jj).data(), static_cast<std::size_t>(L));
    for (int k = 0; k < K; ++k) {
      const double prior = log_prior(j, k);
      lw[static_cast<std::size_t>(k)] =
          prior == -std::numeric_limits<double>::infinity()
              ? prior
              : prior + log_gem_predictive(cj, std::span<const double>(n.col(k).data(), static_cast<std::size_t>(L)),
                                           beta, closed);
    }
    state.S[j] = static_cast<int>(draw_categorical_log(rng, lw));
    n.col(state.S[j]) += unit.col(jj);
  }
}

}  // namespace cam
