// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cam/error.hpp"

namespace cam {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(DataKind kind) {
  return kind == DataKind::count ? "count" : "continuous";
}

DataKind parse_data_kind(const std::string& text) {
  if (text == "count") return DataKind::count;
  if (text == "continuous") return DataKind::continuous;
  throw ValidationError("unknown data kind '" + text + "'");
}

std::size_t Dataset::num_observations() const {
  std::size_t n = 0;
  for (const auto& u : units) n += u.size();
  return n;
}

void ValidationReport::throw_if_invalid() const {
  if (ok()) return;
  std::ostringstream os;
  os << "invalid dataset:";
  for (const auto& e : errors) os << "\n  - " << e;
  throw ValidationError(os.str());
}

ValidationReport validate_dataset(const Dataset& data, bool compute_scale) {
  ValidationReport report;
  const std::size_t J = data.units.size();
  if (J == 0) {
    report.errors.emplace_back("dataset has no units");
    return report;
  }
  for (std::size_t j = 0; j < J; ++j) {
    const auto& unit = data.units[j];
    if (unit.empty()) {
      report.errors.push_back("unit " + std::to_string(j + 1) + " is empty");
      continue;
    }
    for (std::size_t i = 0; i < unit.size(); ++i) {
      const double y = unit[i];
      if (!std::isfinite(y)) {
        report.errors.push_back("unit " + std::to_string(j + 1) + ", observation " +
                                std::to_string(i + 1) + " is not finite");
      } else if (data.kind == DataKind::count) {
        if (y < 0.0) {
          report.errors.push_back("unit " + std::to_string(j + 1) + ", observation " +
                                  std::to_string(i + 1) + " is a negative count");
        } else if (y != std::floor(y)) {
          report.errors.push_back("unit " + std::to_string(j + 1) + ", observation " +
                                  std::to_string(i + 1) + " is not an integer count");
        }
      }
    }
  }
  if (!data.covariate.empty() && data.covariate.size() != J) {
    report.errors.emplace_back("covariate must have one entry per unit");
  }
  for (double x : data.covariate) {
    if (!std::isfinite(x)) report.errors.emplace_back("covariate value is not finite");
  }
  if (!data.scale.empty()) {
    if (data.scale.size() != J) report.errors.emplace_back("scale must have one entry per unit");
    for (double g : data.scale) {
      if (!(g > 0.0) || !std::isfinite(g)) {
        report.errors.emplace_back("scale factors must be positive and finite");
        break;
      }
    }
  }
  if (compute_scale) {
    report.gamma.assign(J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      const auto& unit = data.units[j];
      if (unit.empty()) continue;
      double sum = 0.0;
      for (double y : unit) sum += y;
      const double mean = sum / static_cast<double>(unit.size());
      if (!(mean > 0.0)) {
        report.errors.push_back("unit " + std::to_string(j + 1) +
                                " has non-positive mean, library scale undefined");
      }
      report.gamma[j] = mean;
    }
  }
  return report;
}

void attach_library_scaling(Dataset& data) {
  const ValidationReport report = validate_dataset(data, true);
  report.throw_if_invalid();
  data.scale = report.gamma;
}

void Hyperparameters::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string(name) + " must be positive");
    }
  };
  if (!std::isfinite(m0)) throw ValidationError("m0 must be finite");
  positive(k0, "k0");
  positive(a0, "a0");
  positive(b0, "b0");
  for (const auto* c : {&alpha, &beta}) {
    positive(c->value, "concentration");
    if (!c->is_fixed()) {
      positive(c->shape, "concentration prior shape");
      positive(c->rate, "concentration prior rate");
    }
  }
  for (double kappa : {kappa_D, kappa_O}) {
    if (!(kappa > 0.0 && kappa < 1.0)) throw ValidationError("kappa must lie in (0, 1)");
  }
  if (regression) {
    if (!std::isfinite(regression->mean)) throw ValidationError("regression mean must be finite");
    positive(regression->precision, "regression precision");
  }
}

Hyperparameters default_hyperparameters(const Dataset& data) {
  Hyperparameters h;
  double sum = 0.0;
  double sum_sq = 0.0;
  double n = 0.0;
  for (std::size_t j = 0; j < data.units.size(); ++j) {
    const double g = data.scale_of(j);
    for (double y : data.units[j]) {
      const double w = y / g;
      sum += w;
      sum_sq += w * w;
      n += 1.0;
    }
  }
  if (n > 0.0) {
    h.m0 = sum / n;
    const double var = n > 1.0 ? (sum_sq - n * h.m0 * h.m0) / (n - 1.0) : 0.0;
    h.k0 = var > 0.0 ? 1.0 / var : 1.0;
  }
  return h;
}

std::string to_string(ConcentrationUpdate update) {
  switch (update) {
    case ConcentrationUpdate::label_marginal:
      return "label_marginal";
    case ConcentrationUpdate::stick_conditional:
      return "stick_conditional";
    case ConcentrationUpdate::escobar_west:
      return "escobar_west";
  }
  return "?";
}

ConcentrationUpdate parse_concentration_update(const std::string& text) {
  for (auto u : {ConcentrationUpdate::label_marginal, ConcentrationUpdate::stick_conditional,
                 ConcentrationUpdate::escobar_west}) {
    if (to_string(u) == text) return u;
  }
  throw ValidationError("unknown concentration update '" + text + "'");
}

double RoundingGrid::threshold(long g) const {
  if (g <= 0) return -kInf;
  return static_cast<double>(g - 1);
}

double xi(int k, double kappa) { return std::exp(log_xi(k, kappa)); }

double log_xi(int k, double kappa) {
  if (k < 1) throw ParameterError("envelope index must be >= 1");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ParameterError("kappa must lie in (0, 1)");
  return std::log1p(-kappa) + static_cast<double>(k - 1) * std::log(kappa);
}

double normal_cdf(double x, double mu, double sigma2) {
  if (x == -kInf) return 0.0;
  if (x == kInf) return 1.0;
  return 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * sigma2));
}

double normal_log_pdf(double x, double mu, double sigma2) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * sigma2) + d * d / sigma2);
}

double dcam_cell_prob(long z, double mu, double sigma2, const RoundingGrid& grid,
                      std::optional<double> scale) {
  if (z < 0) throw ParameterError("count must be non-negative");
  if (!(sigma2 > 0.0)) throw ParameterError("sigma2 must be positive");
  const double g = scale.value_or(1.0);
  const double m = g * mu;
  const double sd = g * std::sqrt(sigma2);
  const double lo = (grid.lower(z) - m) / sd;
  const double hi = (grid.upper(z) - m) / sd;
  // Difference of the tail on the side that keeps precision.
  double p;
  if (lo >= 0.0) {
    p = 0.5 * (std::erfc(lo / std::numbers::sqrt2) - std::erfc(hi / std::numbers::sqrt2));
  } else {
    p = 0.5 * (std::erfc(-hi / std::numbers::sqrt2) - std::erfc(-lo / std::numbers::sqrt2));
  }
  return p > 0.0 ? p : 0.0;
}

double dcam_log_cell_prob(long z, double mu, double sigma2, const RoundingGrid& grid,
                          std::optional<double> scale) {
  const double p = dcam_cell_prob(z, mu, sigma2, grid, scale);
  if (p > 1e-300) return std::log(p);
  // Deep tail: log of the one-sided mass via the Mills-ratio asymptote.
  const double g = scale.value_or(1.0);
  const double m = g * mu;
  const double sd = g * std::sqrt(sigma2);
  const double lo = (grid.lower(z) - m) / sd;
  const double hi = (grid.upper(z) - m) / sd;
  const double t = lo > 0.0 ? lo : -hi;  // distance of the near edge into the tail
  if (!(t > 0.0) || !std::isfinite(t)) return -std::numeric_limits<double>::infinity();
  const double width = hi - lo;
  // log P ~ log phi(t) - log t + log(1 - exp(-t * width))
  const double near = -0.5 * t * t - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(t);
  const double frac = std::isfinite(width) ? std::log(-std::expm1(-t * width)) : 0.0;
  return near + frac;
}

std::vector<double> weights_from_sticks(std::span<const double> sticks) {
  std::vector<double> w(sticks.size());
  double rest = 1.0;
  for (std::size_t k = 0; k < sticks.size(); ++k) {
    w[k] = sticks[k] * rest;
    rest *= 1.0 - sticks[k];
  }
  return w;
}

std::vector<double> sticks_from_weights(std::span<const double> weights) {
  std::vector<double> v(weights.size());
  double rest = 1.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    v[k] = rest > 0.0 ? weights[k] / rest : 0.0;
    rest -= weights[k];
  }
  return v;
}

double working_value(const SamplerState& state, const Dataset& data, std::size_t j,
                     std::size_t i) {
  const double y = data.kind == DataKind::count ? state.y_latent[j][i] : data.units[j][i];
  return y / data.scale_of(j) - state.reg_coeff * data.covariate_of(j);
}

}  // namespace cam
