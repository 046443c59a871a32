// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_SLICE_SAMPLER_HPP
#define CAM_SLICE_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cam/draws.hpp"
#include "cam/model.hpp"
#include "cam/random.hpp"

namespace cam {

enum class EnvelopeKind {
  geometric,  // xi_k = (1 - kappa) kappa^(k-1), shared by every outer cluster
  dependent,  // xi = the current weights themselves
};

struct SliceConfig {
  long iters = 5000;
  long burnin = 5000;
  long thin = 1;
  int max_K = 200;
  int max_L = 200;
  bool enable_label_switch = false;
  EnvelopeKind envelope = EnvelopeKind::geometric;
  /// label_marginal needs geometric envelopes; dependent ones fall back to
  /// stick_conditional.
  ConcentrationUpdate concentration_update = ConcentrationUpdate::label_marginal;
  /// Two extra S updates, one with the inner weights integrated out and one
  /// with M summed out (geometric envelopes only).
  bool collapsed_labels = true;
  std::uint64_t seed = 1;
  /// Number of quantile bins used to initialise the observational labels.
  int init_inner = 10;

  void validate() const;
};

/// Closed-form threshold floor((log u - log(1 - kappa)) / log kappa).
int slice_threshold(double u_min, double kappa);

/// Number of labels k >= 1 with xi_k > u (the admissible set is {1..count}).
int admissible_count(double u, double kappa);

struct ActiveCounts {
  int K;
  int L;
  bool K_capped;
  bool L_capped;
};

/// Nested independent slice-efficient sampler for the common atoms model and
/// its rounded-Gaussian count variant.
///
/// Each step is exposed so it can be exercised in isolation; sweep() runs
/// them in the order latent y -> slice variables -> outer sticks -> inner
/// sticks -> S -> M -> atoms -> concentrations -> regression -> label switch.
/// With geometric envelopes two more S updates run between S and M: one with
/// the inner weights integrated out (followed by fresh inner sticks) and one
/// with M summed out. Given M and the inner weights alone, units leave their
/// cluster only rarely.
/// Both truncation levels are capped; reaching a cap closes the last stick so
/// the sampler targets the model truncated at the cap, and a warning is kept.
class SliceSampler {
 public:
  SliceSampler(Dataset data, Hyperparameters hyper, SliceConfig config, RngStream rng);

  void sweep();

  void step_latent();
  void step_slice_variables();
  void step_outer_sticks();
  void step_inner_sticks();
  void step_distributional_labels();
  /// S given M with the inner weights integrated out, then new inner sticks.
  void step_distributional_labels_collapsed();
  /// S with M summed out given the slice variables; M must be redrawn next.
  void step_distributional_labels_marginal();
  void step_observational_labels();
  void step_atoms();
  void step_concentrations();
  void step_regression();
  void step_label_switch();

  ActiveCounts compute_active_counts() const;

  /// Log-probabilities (unnormalised) of S_j over the admissible clusters; -inf outside.
  std::vector<double> distributional_log_weights(std::size_t j) const;
  /// As above with M_j summed out over the atoms each u^O_ij admits.
  std::vector<double> distributional_log_weights_marginal(std::size_t j) const;
  /// Log-probabilities (unnormalised) of M_ij over the admissible atoms.
  std::vector<double> observational_log_weights(std::size_t j, std::size_t i) const;

  SamplerState& state() { return state_; }
  const SamplerState& state() const { return state_; }
  const Dataset& data() const { return data_; }
  /// Replaces the observations (same shape); used by joint-distribution tests.
  void replace_observations(std::vector<std::vector<double>> units);
  const Hyperparameters& hyper() const { return hyper_; }
  const SliceConfig& config() const { return config_; }
  RngStream& rng() { return rng_; }

  long sweeps_done() const { return sweeps_; }
  ConcentrationUpdate effective_concentration_update() const;
  long cap_hits() const { return cap_hits_; }
  double outer_switch_rate() const;
  double inner_switch_rate() const;

  /// Throws NumericError if any scalar or atom is non-finite.
  void check_finite() const;

 private:
  void initialise();
  double log_envelope_outer(int k) const;
  double log_envelope_inner(int l, int k) const;
  void draw_outer_sticks(int K);
  void draw_inner_sticks(int K, int L);
  void extend_dependent_outer();
  void extend_dependent_inner();
  void ensure_atoms(int L);
  double log_kernel(std::size_t j, std::size_t i, int l) const;

  Dataset data_;
  Hyperparameters hyper_;
  SliceConfig config_;
  RngStream rng_;
  SamplerState state_;
  long sweeps_ = 0;
  long cap_hits_ = 0;
  long outer_switch_tries_ = 0, outer_switch_accepts_ = 0;
  long inner_switch_tries_ = 0, inner_switch_accepts_ = 0;
};

/// Runs burn-in plus iters sweeps and keeps every thin-th post-burn-in draw.
DrawStore run_chain(const Dataset& data, const Hyperparameters& hyper, const SliceConfig& config,
                    int chain_index = 0);

std::string to_string(EnvelopeKind kind);

/// Configuration echo shared by both samplers' metadata.
std::vector<std::pair<std::string, std::string>> describe(const Hyperparameters& hyper);

}  // namespace cam

#endif  // CAM_SLICE_SAMPLER_HPP
