// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_MODEL_HPP
#define CAM_MODEL_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cam {

enum class DataKind { continuous, count };

std::string to_string(DataKind kind);
DataKind parse_data_kind(const std::string& text);

/// Nested observations: J units, unit j holding n_j values.
///
/// Count data is stored as non-negative integral doubles. `covariate` and
/// `scale` are either empty or hold one entry per unit.
struct Dataset {
  DataKind kind = DataKind::continuous;
  std::vector<std::vector<double>> units;
  std::vector<double> covariate;
  std::vector<double> scale;
  std::vector<std::string> unit_names;
  std::vector<std::string> item_names;

  std::size_t num_units() const { return units.size(); }
  std::size_t num_observations() const;
  bool has_covariate() const { return !covariate.empty(); }
  bool has_scale() const { return !scale.empty(); }
  double scale_of(std::size_t j) const { return scale.empty() ? 1.0 : scale[j]; }
  double covariate_of(std::size_t j) const { return covariate.empty() ? 0.0 : covariate[j]; }
};

struct ValidationReport {
  std::vector<std::string> errors;
  /// Per-unit mean counts, filled when scaling was requested and is defined.
  std::vector<double> gamma;

  bool ok() const { return errors.empty(); }
  /// Throws ValidationError listing every problem.
  void throw_if_invalid() const;
};

/// Checks the dataset invariants; with `compute_scale` also derives
/// gamma_j = mean of unit j (count data with an all-zero unit is rejected).
ValidationReport validate_dataset(const Dataset& data, bool compute_scale = false);

/// Validates and, on success, stores the per-unit scale factors in `data.scale`.
void attach_library_scaling(Dataset& data);

struct ConcentrationPrior {
  enum class Mode { fixed, gamma };
  Mode mode = Mode::gamma;
  double value = 1.0;  // used when fixed; initial value otherwise
  double shape = 3.0;
  double rate = 3.0;

  static ConcentrationPrior fixed_at(double v) { return {Mode::fixed, v, 3.0, 3.0}; }
  static ConcentrationPrior gamma(double a, double b) { return {Mode::gamma, a / b, a, b}; }
  bool is_fixed() const { return mode == Mode::fixed; }
  double prior_mean() const { return is_fixed() ? value : shape / rate; }
};

struct RegressionPrior {
  double mean = 0.0;
  double precision = 1.0;
};

/// Hyperparameters of the common atoms model.
///
/// `alpha` drives the outer (distributional) GEM and `beta` the inner
/// (observational) GEM. The NIG base measure is
/// sigma2 ~ InvGamma(a0, b0), mu | sigma2 ~ N(m0, sigma2 / k0).
struct Hyperparameters {
  double m0 = 0.0;
  double k0 = 1.0;
  double a0 = 3.0;
  double b0 = 1.0;
  ConcentrationPrior alpha = ConcentrationPrior::gamma(3.0, 3.0);
  ConcentrationPrior beta = ConcentrationPrior::gamma(3.0, 3.0);
  double kappa_D = 0.5;
  double kappa_O = 0.5;
  std::optional<RegressionPrior> regression;

  void validate() const;
};

/// Empirical-Bayes defaults: m0 = grand mean and k0 = 1 / overall variance of
/// the (scaled) data, b0 = 1, a0 = 3, Gamma(3, 3) priors on both concentrations.
Hyperparameters default_hyperparameters(const Dataset& data);

/// Rounding thresholds a(0) = -inf, a(g) = g - 1 for g >= 1, so count z
/// corresponds to the latent cell [a(z), a(z+1)).
class RoundingGrid {
 public:
  double threshold(long g) const;
  double lower(long z) const { return threshold(z); }
  double upper(long z) const { return threshold(z + 1); }
};

/// Geometric slice envelope xi_k = (1 - kappa) kappa^(k-1), k >= 1.
double xi(int k, double kappa);
double log_xi(int k, double kappa);

/// Normal CDF with mean mu and variance sigma2; handles infinite arguments.
double normal_cdf(double x, double mu, double sigma2);
double normal_log_pdf(double x, double mu, double sigma2);

/// P(Z = z) under the rounded Gaussian kernel. With a scale gamma the latent
/// variable is N(gamma * mu, gamma^2 * sigma2).
double dcam_cell_prob(long z, double mu, double sigma2, const RoundingGrid& grid = {},
                      std::optional<double> scale = std::nullopt);
double dcam_log_cell_prob(long z, double mu, double sigma2, const RoundingGrid& grid = {},
                          std::optional<double> scale = std::nullopt);

/// Stick-breaking map between stick proportions and weights (same length).
std::vector<double> weights_from_sticks(std::span<const double> sticks);
std::vector<double> sticks_from_weights(std::span<const double> weights);

struct Atom {
  double mu = 0.0;
  double sigma2 = 1.0;
};

/// Full latent configuration of one chain. Labels are zero-based in memory.
///
/// omega(l, k) is the inner weight of atom l in distributional cluster k,
/// log_pi[k] the outer weight of cluster k.
enum class ConcentrationUpdate {
  label_marginal,     // slice sampling on the labels' likelihood with the sticks integrated out
  stick_conditional,  // Gamma update given the instantiated sticks
  escobar_west,       // two-stage auxiliary update on the occupied-cluster counts
};

std::string to_string(ConcentrationUpdate update);
ConcentrationUpdate parse_concentration_update(const std::string& text);

struct SamplerState {
  std::vector<int> S;
  std::vector<std::vector<int>> M;

  std::vector<double> log_v;        // log v_k
  std::vector<double> log_1mv;      // log(1 - v_k)
  std::vector<double> log_pi;
  Eigen::MatrixXd log_u;            // L x K, log u_{l,k}
  Eigen::MatrixXd log_1mu;          // L x K, log(1 - u_{l,k})
  Eigen::MatrixXd log_omega;        // L x K

  std::vector<Atom> theta;
  std::vector<double> uD;
  std::vector<std::vector<double>> uO;

  double alpha = 1.0;
  double beta = 1.0;
  std::vector<std::vector<double>> y_latent;
  double reg_coeff = 0.0;

  int K_active = 1;
  int L_active = 1;

  int num_outer() const { return static_cast<int>(log_pi.size()); }
  int num_inner() const { return static_cast<int>(log_omega.rows()); }
};

/// Working response for the atom-level kernel: y / gamma_j - reg * x_j, where y
/// is the observed value (continuous) or the latent value (count).
double working_value(const SamplerState& state, const Dataset& data, std::size_t j,
                     std::size_t i);

}  // namespace cam

#endif  // CAM_MODEL_HPP
