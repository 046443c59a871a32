// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_PRIOR_HPP
#define CAM_PRIOR_HPP

#include <string>
#include <vector>

#include "cam/random.hpp"

namespace cam {

// Closed-form prior quantities of the common atoms model with outer
// concentration alpha and inner concentration beta.

/// P(G_j = G_j') = 1 / (1 + alpha).
double prob_equal_distributions(double alpha);

/// Probability that two observations from different units share an atom.
double prob_tie_observations(double alpha, double beta);

/// Corr(G_j(A), G_j'(A)); always inside (1/2, 1).
double correlation_same_set(double alpha, double beta);

/// Cov(G_j(A), G_j'(B)) given the base-measure masses H(A), H(B), H(A n B).
double covariance_sets(double alpha, double beta, double H_A, double H_B, double H_AB);

/// Upper bound on E[d_TV(G_j, G_j^(K,L))] for the (K, L) truncation.
double truncation_bound_single(double alpha, double beta, int K, int L);

/// Upper bound on the total variation between the data law and its (K, L)
/// truncation for a mixture with N observations in total.
double truncation_bound_mixture(double alpha, double beta, int K, int L, long N);

struct PriorSummary {
  double p_equal_G;
  double p_tie_obs;
  double rho_same_set;
  double cov_coef_intersection;
  double cov_coef_product;
};

PriorSummary prior_summary(double alpha, double beta);

struct McEstimate {
  std::string name;
  double analytic;   // closed-form value, or the bound for one-sided checks
  double estimate;
  double std_error;
  bool one_sided;    // pass when estimate <= analytic + 4 SE
  bool flagged;
};

struct PriorCheckReport {
  double alpha;
  double beta;
  long reps;
  int depth;
  std::vector<McEstimate> checks;

  bool all_passed() const;
};

struct PriorCheckOptions {
  long reps = 100000;
  int depth = 200;
  /// (K, L) pairs for which the single-distribution truncation bound is checked.
  std::vector<std::pair<int, int>> truncations = {{5, 5}, {10, 10}};
  bool check_correlation = true;
  double flag_sigmas = 4.0;
};

/// Monte-Carlo check of the closed forms: simulates depth-truncated prior
/// draws and compares empirical co-clustering, tie, correlation and
/// total-variation frequencies with their analytic values.
PriorCheckReport mc_verify_prior(double alpha, double beta, const PriorCheckOptions& options,
                                 RngStream& rng);

}  // namespace cam

#endif  // CAM_PRIOR_HPP
