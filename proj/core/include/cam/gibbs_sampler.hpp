// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_GIBBS_SAMPLER_HPP
#define CAM_GIBBS_SAMPLER_HPP

#include <cstdint>
#include <vector>

#include "cam/draws.hpp"
#include "cam/model.hpp"
#include "cam/random.hpp"

namespace cam {

struct TruncationLevels {
  int K = 35;
  int L = 50;
};

struct GibbsConfig {
  long iters = 5000;
  long burnin = 5000;
  long thin = 1;
  TruncationLevels levels;
  std::uint64_t seed = 1;
  int init_inner = 10;
  /// Extra S update given M with the inner weights integrated out.
  bool collapsed_labels = true;
  /// label_marginal or stick_conditional (the truncated conjugate Gamma forms).
  ConcentrationUpdate concentration_update = ConcentrationUpdate::label_marginal;

  void validate() const;
};

/// Blocked Gibbs sampler for the (K, L)-truncated common atoms model.
///
/// A sweep draws S with M and the latent values integrated out, then M with
/// the latent values integrated out, then the latent values, so each block is
/// a valid partially collapsed update. An optional second S update given M
/// integrates the inner weights out; the weights are redrawn right after it.
/// Weights, atoms, concentrations and the regression coefficient follow from
/// their conjugate full conditionals.
class GibbsSampler {
 public:
  GibbsSampler(Dataset data, Hyperparameters hyper, GibbsConfig config, RngStream rng);

  void sweep();

  void step_S();
  void step_M();
  void step_latent();
  /// S given M with the inner weights integrated out (weights must follow).
  void step_S_collapsed();
  void step_weights();
  void step_atoms();
  void step_concentrations();
  void step_regression();

  /// Normalised P(S_j = k | weights, atoms), M and latent values integrated out.
  std::vector<double> S_probabilities(std::size_t j) const;
  /// Normalised P(M_ij = l | S_j, weights, atoms), latent value integrated out.
  std::vector<double> M_probabilities(std::size_t j, std::size_t i) const;

  SamplerState& state() { return state_; }
  const SamplerState& state() const { return state_; }
  const Dataset& data() const { return data_; }
  void replace_observations(std::vector<std::vector<double>> units);
  const GibbsConfig& config() const { return config_; }
  RngStream& rng() { return rng_; }
  long sweeps_done() const { return sweeps_; }

  void check_finite() const;

 private:
  void initialise();
  /// log f(y_ij | theta_l) for all l: normal density (continuous) or cell
  /// probability (count), both including the unit scale and covariate shift.
  void kernel_row(std::size_t j, double value, std::vector<double>& out) const;
  /// Per-unit table of kernel rows over the distinct values of the unit.
  std::vector<double> S_log_weights(std::size_t j) const;
  std::vector<double> S_log_weights(std::size_t j, const Eigen::MatrixXd& omega) const;

  struct UnitKernel {
    std::vector<double> values;  // distinct observed values of the unit
    std::vector<int> index;      // observation -> row of log_f
    std::vector<double> mult;    // multiplicity of each distinct value
    Eigen::MatrixXd log_f;       // distinct values x L
    Eigen::VectorXd row_max;
    Eigen::MatrixXd scaled_f;    // exp(log_f - row_max)
  };
  const UnitKernel& kernels(std::size_t j) const;
  void invalidate_kernels() { kernels_valid_ = false; }

  Dataset data_;
  Hyperparameters hyper_;
  GibbsConfig config_;
  RngStream rng_;
  SamplerState state_;
  long sweeps_ = 0;
  mutable std::vector<UnitKernel> kernels_;
  mutable bool kernels_valid_ = false;
};

DrawStore run_gibbs_chain(const Dataset& data, const Hyperparameters& hyper,
                          const GibbsConfig& config, int chain_index = 0);

}  // namespace cam

#endif  // CAM_GIBBS_SAMPLER_HPP
