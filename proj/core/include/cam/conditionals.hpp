// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_CONDITIONALS_HPP
#define CAM_CONDITIONALS_HPP

#include <functional>
#include <span>
#include <vector>

#include "cam/model.hpp"
#include "cam/random.hpp"

namespace cam {

// Full conditionals shared by the slice and the truncated Gibbs samplers.

struct NigParams {
  double m;
  double k;
  double a;
  double b;
};

/// Conjugate NIG update from n values with the given sum and centred sum of squares.
NigParams nig_posterior(const Hyperparameters& hyper, double n, double mean, double centred_ss);

/// Sufficient statistics of the working values assigned to each atom.
struct AtomStats {
  std::vector<double> count;
  std::vector<double> mean;
  std::vector<double> centred_ss;
};

AtomStats collect_atom_stats(const SamplerState& state, const Dataset& data, int num_atoms);

/// Redraws atoms 0..num_atoms-1 from their NIG full conditionals (prior for empty atoms).
void update_atoms(SamplerState& state, const Dataset& data, const Hyperparameters& hyper,
                  int num_atoms, RngStream& rng);

/// Latent continuous values of count data:
/// y ~ TN(gamma_j (mu + reg x_j), gamma_j^2 sigma2; [a(z), a(z+1))).
void update_latent(SamplerState& state, const Dataset& data, RngStream& rng,
                   const RoundingGrid& grid = {});

/// Regression coefficient full conditional; no-op without a regression prior.
void update_regression(SamplerState& state, const Dataset& data, const Hyperparameters& hyper,
                       RngStream& rng);

struct NormalParams {
  double mean;
  double variance;
};
NormalParams regression_posterior(const SamplerState& state, const Dataset& data,
                                  const RegressionPrior& prior);

/// Two-stage auxiliary-variable update for a DP concentration with a
/// Gamma(a, b) prior, given k occupied clusters among n items.
double escobar_west_mixture_weight(double a, double b, int k, double n, double eta);
double escobar_west_update(RngStream& rng, double current, double a, double b, int k, double n);

/// Gamma(a + m, b - sum log(1 - v)) over m instantiated free sticks.
double concentration_from_sticks(RngStream& rng, double a, double b, int num_sticks,
                                 double sum_log_1mv);

/// Draws a concentration from a Gamma(shape, rate) prior times exp(log_lik(c))
/// by univariate slice sampling on log c (stepping out, then shrinkage).
double slice_sample_concentration(RngStream& rng, double current, double shape, double rate,
                                  const std::function<double(double)>& log_lik);

/// log p(labels of one unit | labels of the other units of a cluster) with the
/// GEM(beta) inner sticks integrated out. unit[l] and others[l] count label l;
/// the stick at index `closed` (if >= 0) is fixed at one, as under truncation.
double log_gem_predictive(std::span<const double> unit, std::span<const double> others, double beta,
                          int closed);

/// Redraws every S_j given M with the inner weights integrated out, one unit
/// at a time. log_prior(j, k) is the log weight of cluster k for unit j (-inf
/// excludes it); clusters are 0..K-1 and inner labels 0..L-1. The inner
/// weights must be redrawn afterwards.
void update_S_collapsed(SamplerState& state, int K, int L, double beta, int closed,
                        const std::function<double(std::size_t, int)>& log_prior, RngStream& rng);

}  // namespace cam

#endif  // CAM_CONDITIONALS_HPP
