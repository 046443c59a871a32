// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/slice_sampler.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <numeric>

#include "cam/conditionals.hpp"
#include "cam/error.hpp"

namespace cam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LogStick closing_stick() { return {0.0, -kInf}; }

int max_label(const std::vector<int>& labels) {
  return labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
}

int max_label(const std::vector<std::vector<int>>& labels) {
  int m = -1;
  for (const auto& row : labels) m = std::max(m, max_label(row));
  return m;
}

// Distinct labels of one unit with their multiplicities.
std::vector<std::pair<int, int>> label_counts(const std::vector<int>& labels) {
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<int, int>> out;
  for (int l : sorted) {
    if (!out.empty() && out.back().first == l) {
      ++out.back().second;
    } else {
      out.emplace_back(l, 1);
    }
  }
  return out;
}

double concentration_initial(const ConcentrationPrior& prior) {
  return prior.is_fixed() ? prior.value : prior.prior_mean();
}

}  // namespace

void SliceConfig::validate() const {
  if (iters < 1) throw ValidationError("iters must be at least 1");
  if (burnin < 0) throw ValidationError("burnin must be non-negative");
  if (thin < 1) throw ValidationError("thin must be at least 1");
  if (thin > iters) throw ValidationError("thin must not exceed iters");
  if (max_K < 1 || max_L < 1) throw ValidationError("truncation caps must be at least 1");
  if (init_inner < 1) throw ValidationError("init_inner must be at least 1");
}

int slice_threshold(double u_min, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ParameterError("kappa must lie in (0, 1)");
  if (!(u_min > 0.0)) throw ParameterError("u_min must be positive");
  const double x = (std::log(u_min) - std::log1p(-kappa)) / std::log(kappa);
  if (x >= static_cast<double>(INT_MAX)) return INT_MAX;
  return std::max(1, static_cast<int>(std::floor(x)));
}

int admissible_count(double u, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ParameterError("kappa must lie in (0, 1)");
  if (!(u > 0.0)) return INT_MAX;
  const double log_u = std::log(u);
  const double x = (log_u - std::log1p(-kappa)) / std::log(kappa);
  if (x < 0.0) return 0;
  if (x >= static_cast<double>(INT_MAX / 2)) return INT_MAX;
  // The closed form lands within one of the answer; settle it on the exact comparison.
  int n = static_cast<int>(std::floor(x)) + 1;
  while (n >= 1 && log_xi(n, kappa) <= log_u) --n;
  while (log_xi(n + 1, kappa) > log_u) ++n;
  return n;
}

std::string to_string(EnvelopeKind kind) {
  return kind == EnvelopeKind::dependent ? "dependent" : "geometric";
}

std::vector<std::pair<std::string, std::string>> describe(const Hyperparameters& hyper) {
  auto conc = [](const ConcentrationPrior& p) {
    return p.is_fixed() ? "fixed(" + format_double(p.value) + ")"
                        : "gamma(" + format_double(p.shape) + "," + format_double(p.rate) + ")";
  };
  std::vector<std::pair<std::string, std::string>> out = {
      {"m0", format_double(hyper.m0)},       {"k0", format_double(hyper.k0)},
      {"a0", format_double(hyper.a0)},       {"b0", format_double(hyper.b0)},
      {"alpha", conc(hyper.alpha)},          {"beta", conc(hyper.beta)},
      {"kappa_D", format_double(hyper.kappa_D)}, {"kappa_O", format_double(hyper.kappa_O)},
  };
  if (hyper.regression) {
    out.emplace_back("reg_mean", format_double(hyper.regression->mean));
    out.emplace_back("reg_precision", format_double(hyper.regression->precision));
  } else {
    out.emplace_back("regression", "off");
  }
  return out;
}

SliceSampler::SliceSampler(Dataset data, Hyperparameters hyper, SliceConfig config, RngStream rng)
    : data_(std::move(data)), hyper_(std::move(hyper)), config_(config), rng_(std::move(rng)) {
  config_.validate();
  hyper_.validate();
  validate_dataset(data_).throw_if_invalid();
  if (data_.has_scale()) {
    for (double g : data_.scale) {
      if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("scale factors must be positive");
    }
  }
  if (hyper_.regression && !data_.has_covariate()) {
    throw ValidationError("regression prior given but the dataset has no covariate");
  }
  initialise();
}

void SliceSampler::initialise() {
  const std::size_t J = data_.num_units();
  state_ = SamplerState{};
  state_.alpha = concentration_initial(hyper_.alpha);
  state_.beta = concentration_initial(hyper_.beta);
  state_.reg_coeff = hyper_.regression ? hyper_.regression->mean : 0.0;

  state_.S.resize(J);
  for (std::size_t j = 0; j < J; ++j) state_.S[j] = static_cast<int>(j % static_cast<std::size_t>(config_.max_K));

  if (data_.kind == DataKind::count) {
    state_.y_latent.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
      state_.y_latent[j].resize(data_.units[j].size());
      for (std::size_t i = 0; i < data_.units[j].size(); ++i) {
        const double z = data_.units[j][i];
        state_.y_latent[j][i] = z == 0.0 ? -0.5 : z - 0.5;
      }
    }
  }

  // Observational labels from quantile bins of the working values.
  const int bins = std::min(config_.init_inner, config_.max_L);
  std::vector<std::tuple<double, std::size_t, std::size_t>> order;
  state_.M.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    state_.M[j].assign(data_.units[j].size(), 0);
    for (std::size_t i = 0; i < data_.units[j].size(); ++i) {
      order.emplace_back(working_value(state_, data_, j, i), j, i);
    }
  }
  std::sort(order.begin(), order.end());
  const std::size_t N = order.size();
  for (std::size_t r = 0; r < N; ++r) {
    const auto& [w, j, i] = order[r];
    state_.M[j][i] = static_cast<int>(r * static_cast<std::size_t>(bins) / N);
  }
  update_atoms(state_, data_, hyper_, bins, rng_);
  state_.K_active = max_label(state_.S) + 1;
  state_.L_active = bins;

  state_.uD.assign(J, 0.0);
  state_.uO.resize(J);
  for (std::size_t j = 0; j < J; ++j) state_.uO[j].assign(data_.units[j].size(), 0.0);
}

void SliceSampler::replace_observations(std::vector<std::vector<double>> units) {
  if (units.size() != data_.units.size()) throw ParameterError("unit count changed");
  for (std::size_t j = 0; j < units.size(); ++j) {
    if (units[j].size() != data_.units[j].size()) throw ParameterError("unit size changed");
  }
  data_.units = std::move(units);
}

double SliceSampler::log_envelope_outer(int k) const {
  if (config_.envelope == EnvelopeKind::dependent) return state_.log_pi[static_cast<std::size_t>(k)];
  return log_xi(k + 1, hyper_.kappa_D);
}

double SliceSampler::log_envelope_inner(int l, int k) const {
  if (config_.envelope == EnvelopeKind::dependent) return state_.log_omega(l, k);
  return log_xi(l + 1, hyper_.kappa_O);
}

void SliceSampler::sweep() {
  if (config_.envelope == EnvelopeKind::geometric) {
    step_latent();
    step_slice_variables();
    step_outer_sticks();
    step_inner_sticks();
    step_distributional_labels();
    if (config_.collapsed_labels) {
      step_distributional_labels_collapsed();
      step_distributional_labels_marginal();
    }
    step_observational_labels();
  } else {
    // The envelopes are the weights, so the slice variables must be drawn
    // after the sticks and the observational ones after the new S.
    step_latent();
    step_outer_sticks();
    step_inner_sticks();
    const std::size_t J = data_.num_units();
    for (std::size_t j = 0; j < J; ++j) {
      state_.uD[j] = rng_.uniform() * std::exp(state_.log_pi[static_cast<std::size_t>(state_.S[j])]);
    }
    extend_dependent_outer();
    step_distributional_labels();
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < state_.M[j].size(); ++i) {
        state_.uO[j][i] = rng_.uniform() * std::exp(state_.log_omega(state_.M[j][i], state_.S[j]));
      }
    }
    extend_dependent_inner();
    step_observational_labels();
  }
  step_atoms();
  step_concentrations();
  step_regression();
  if (config_.enable_label_switch) step_label_switch();
  ++sweeps_;
}

void SliceSampler::step_latent() {
  update_latent(state_, data_, rng_);
}

ActiveCounts SliceSampler::compute_active_counts() const {
  if (config_.envelope == EnvelopeKind::dependent) {
    return {state_.K_active, state_.L_active, state_.K_active >= config_.max_K,
            state_.L_active >= config_.max_L};
  }
  const double uD_min = *std::min_element(state_.uD.begin(), state_.uD.end());
  double uO_min = kInf;
  for (const auto& row : state_.uO) {
    for (double u : row) uO_min = std::min(uO_min, u);
  }
  const int K_need = std::max(admissible_count(uD_min, hyper_.kappa_D), max_label(state_.S) + 1);
  const int L_need = std::max(admissible_count(uO_min, hyper_.kappa_O), max_label(state_.M) + 1);
  ActiveCounts c{};
  c.K_capped = K_need > config_.max_K;
  c.L_capped = L_need > config_.max_L;
  c.K = std::clamp(K_need, 1, config_.max_K);
  c.L = std::clamp(L_need, 1, config_.max_L);
  return c;
}

void SliceSampler::step_slice_variables() {
  const std::size_t J = data_.num_units();
  for (std::size_t j = 0; j < J; ++j) {
    state_.uD[j] = rng_.uniform() * std::exp(log_envelope_outer(state_.S[j]));
    for (std::size_t i = 0; i < state_.M[j].size(); ++i) {
      state_.uO[j][i] = rng_.uniform() * std::exp(log_envelope_inner(state_.M[j][i], state_.S[j]));
    }
  }
  if (config_.envelope == EnvelopeKind::dependent) return;
  const ActiveCounts c = compute_active_counts();
  if (c.K_capped || c.L_capped) ++cap_hits_;
  state_.K_active = c.K;
  state_.L_active = c.L;
}

void SliceSampler::draw_outer_sticks(int K) {
  std::vector<double> n(static_cast<std::size_t>(K), 0.0);
  for (int s : state_.S) n[static_cast<std::size_t>(s)] += 1.0;
  state_.log_v.resize(static_cast<std::size_t>(K));
  state_.log_1mv.resize(static_cast<std::size_t>(K));
  state_.log_pi.resize(static_cast<std::size_t>(K));
  double tail = std::accumulate(n.begin(), n.end(), 0.0);
  double log_rest = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    tail -= n[kk];
    const LogStick st = k == config_.max_K - 1 ? closing_stick()
                                                : draw_log_beta(rng_, 1.0 + n[kk], state_.alpha + tail);
    state_.log_v[kk] = st.log_v;
    state_.log_1mv[kk] = st.log_1mv;
    state_.log_pi[kk] = log_rest + st.log_v;
    log_rest += st.log_1mv;
  }
  state_.K_active = K;
}

void SliceSampler::draw_inner_sticks(int K, int L) {
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(L, K);
  for (std::size_t j = 0; j < state_.M.size(); ++j) {
    for (int m : state_.M[j]) n(m, state_.S[j]) += 1.0;
  }
  state_.log_u.resize(L, K);
  state_.log_1mu.resize(L, K);
  state_.log_omega.resize(L, K);
  for (int k = 0; k < K; ++k) {
    double tail = n.col(k).sum();
    double log_rest = 0.0;
    for (int l = 0; l < L; ++l) {
      tail -= n(l, k);
      const LogStick st = l == config_.max_L - 1
                              ? closing_stick()
                              : draw_log_beta(rng_, 1.0 + n(l, k), state_.beta + tail);
      state_.log_u(l, k) = st.log_v;
      state_.log_1mu(l, k) = st.log_1mv;
      state_.log_omega(l, k) = log_rest + st.log_v;
      log_rest += st.log_1mv;
    }
  }
  state_.L_active = L;
}

void SliceSampler::step_outer_sticks() {
  const int K = config_.envelope == EnvelopeKind::dependent ? max_label(state_.S) + 1 : state_.K_active;
  draw_outer_sticks(K);
}

void SliceSampler::step_inner_sticks() {
  const int L = config_.envelope == EnvelopeKind::dependent ? max_label(state_.M) + 1 : state_.L_active;
  draw_inner_sticks(state_.K_active, L);
}

// Appends prior sticks until the leftover outer mass is below the smallest
// slice variable, so every cluster with pi_k > u_j is instantiated.
void SliceSampler::extend_dependent_outer() {
  const double log_u_min = std::log(*std::min_element(state_.uD.begin(), state_.uD.end()));
  double log_rest = std::accumulate(state_.log_1mv.begin(), state_.log_1mv.end(), 0.0);
  int K = state_.K_active;
  const int L = state_.L_active;
  bool grew = false;
  while (log_rest >= log_u_min && K < config_.max_K) {
    const LogStick st = K == config_.max_K - 1 ? closing_stick() : draw_log_beta(rng_, 1.0, state_.alpha);
    state_.log_v.push_back(st.log_v);
    state_.log_1mv.push_back(st.log_1mv);
    state_.log_pi.push_back(log_rest + st.log_v);
    log_rest += st.log_1mv;
    state_.log_u.conservativeResize(L, K + 1);
    state_.log_1mu.conservativeResize(L, K + 1);
    state_.log_omega.conservativeResize(L, K + 1);
    double inner_rest = 0.0;
    for (int l = 0; l < L; ++l) {
      const LogStick it = l == config_.max_L - 1 ? closing_stick() : draw_log_beta(rng_, 1.0, state_.beta);
      state_.log_u(l, K) = it.log_v;
      state_.log_1mu(l, K) = it.log_1mv;
      state_.log_omega(l, K) = inner_rest + it.log_v;
      inner_rest += it.log_1mv;
    }
    ++K;
    grew = true;
  }
  if (grew && K == config_.max_K && log_rest >= log_u_min) ++cap_hits_;
  state_.K_active = K;
}

void SliceSampler::extend_dependent_inner() {
  double u_min = kInf;
  for (const auto& row : state_.uO) {
    for (double u : row) u_min = std::min(u_min, u);
  }
  const double log_u_min = std::log(u_min);
  const int K = state_.K_active;
  std::vector<char> occupied(static_cast<std::size_t>(K), 0);
  for (int s : state_.S) occupied[static_cast<std::size_t>(s)] = 1;
  std::vector<double> log_rest(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) log_rest[static_cast<std::size_t>(k)] = state_.log_1mu.col(k).sum();
  auto uncovered = [&] {
    for (int k = 0; k < K; ++k) {
      if (occupied[static_cast<std::size_t>(k)] && log_rest[static_cast<std::size_t>(k)] >= log_u_min) {
        return true;
      }
    }
    return false;
  };
  int L = state_.L_active;
  while (uncovered() && L < config_.max_L) {
    state_.log_u.conservativeResize(L + 1, K);
    state_.log_1mu.conservativeResize(L + 1, K);
    state_.log_omega.conservativeResize(L + 1, K);
    for (int k = 0; k < K; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const LogStick it = L == config_.max_L - 1 ? closing_stick() : draw_log_beta(rng_, 1.0, state_.beta);
      state_.log_u(L, k) = it.log_v;
      state_.log_1mu(L, k) = it.log_1mv;
      state_.log_omega(L, k) = log_rest[kk] + it.log_v;
      log_rest[kk] += it.log_1mv;
    }
    ++L;
  }
  if (L == config_.max_L && uncovered()) ++cap_hits_;
  state_.L_active = L;
}

std::vector<double> SliceSampler::distributional_log_weights(std::size_t j) const {
  const int K = state_.K_active;
  const auto counts = label_counts(state_.M[j]);
  const double log_u = std::log(state_.uD[j]);
  std::vector<double> lw(static_cast<std::size_t>(K), -kInf);
  for (int k = 0; k < K; ++k) {
    const double env = log_envelope_outer(k);
    if (!(log_u < env)) continue;
    double v = state_.log_pi[static_cast<std::size_t>(k)] - env;
    for (const auto& [l, c] : counts) v += c * state_.log_omega(l, k);
    lw[static_cast<std::size_t>(k)] = v;
  }
  return lw;
}

void SliceSampler::step_distributional_labels() {
  for (std::size_t j = 0; j < data_.num_units(); ++j) {
    const auto lw = distributional_log_weights(j);
    state_.S[j] = static_cast<int>(draw_categorical_log(rng_, lw));
  }
}

std::vector<double> SliceSampler::distributional_log_weights_marginal(std::size_t j) const {
  const int K = state_.K_active;
  const int L = state_.L_active;
  const double log_u = std::log(state_.uD[j]);
  const std::size_t n = state_.M[j].size();
  // Kernel minus inner envelope per observation and admissible atom.
  std::vector<double> base(n * static_cast<std::size_t>(L), -kInf);
  for (std::size_t i = 0; i < n; ++i) {
    const double log_uo = std::log(state_.uO[j][i]);
    for (int l = 0; l < L; ++l) {
      const double env = log_envelope_inner(l, 0);
      if (!(log_uo < env)) break;
      base[i * static_cast<std::size_t>(L) + static_cast<std::size_t>(l)] = log_kernel(j, i, l) - env;
    }
  }
  std::vector<double> lw(static_cast<std::size_t>(K), -kInf);
  for (int k = 0; k < K; ++k) {
    const double env = log_envelope_outer(k);
    if (!(log_u < env)) continue;
    double v = state_.log_pi[static_cast<std::size_t>(k)] - env;
    for (std::size_t i = 0; i < n; ++i) {
      double top = -kInf;
      for (int l = 0; l < L; ++l) {
        const double b = base[i * static_cast<std::size_t>(L) + static_cast<std::size_t>(l)];
        if (b == -kInf) break;
        top = std::max(top, b + state_.log_omega(l, k));
      }
      double sum = 0.0;
      for (int l = 0; l < L; ++l) {
        const double b = base[i * static_cast<std::size_t>(L) + static_cast<std::size_t>(l)];
        if (b == -kInf) break;
        sum += std::exp(b + state_.log_omega(l, k) - top);
      }
      v += top + std::log(sum);
    }
    lw[static_cast<std::size_t>(k)] = v;
  }
  return lw;
}

void SliceSampler::step_distributional_labels_marginal() {
  if (config_.envelope == EnvelopeKind::dependent) {
    throw ParameterError("the marginal S update needs geometric envelopes");
  }
  ensure_atoms(state_.L_active);
  for (std::size_t j = 0; j < data_.num_units(); ++j) {
    state_.S[j] = static_cast<int>(draw_categorical_log(rng_, distributional_log_weights_marginal(j)));
  }
}

void SliceSampler::step_distributional_labels_collapsed() {
  if (config_.envelope == EnvelopeKind::dependent) {
    throw ParameterError("the collapsed S update needs geometric envelopes");
  }
  const int K = state_.K_active;
  const int L = state_.L_active;
  const int closed = L == config_.max_L ? L - 1 : -1;
  auto log_prior = [&](std::size_t j, int k) {
    const double env = log_envelope_outer(k);
    if (!(std::log(state_.uD[j]) < env)) return -kInf;
    return state_.log_pi[static_cast<std::size_t>(k)] - env;
  };
  update_S_collapsed(state_, K, L, state_.beta, closed, log_prior, rng_);
  draw_inner_sticks(K, L);
}

void SliceSampler::ensure_atoms(int L) {
  while (static_cast<int>(state_.theta.size()) < L) {
    const NigDraw d = draw_nig(rng_, hyper_.m0, hyper_.k0, hyper_.a0, hyper_.b0);
    state_.theta.push_back({d.mu, d.sigma2});
  }
}

double SliceSampler::log_kernel(std::size_t j, std::size_t i, int l) const {
  const Atom& a = state_.theta[static_cast<std::size_t>(l)];
  return normal_log_pdf(working_value(state_, data_, j, i), a.mu, a.sigma2);
}

std::vector<double> SliceSampler::observational_log_weights(std::size_t j, std::size_t i) const {
  const int L = state_.L_active;
  const int k = state_.S[j];
  const double log_u = std::log(state_.uO[j][i]);
  std::vector<double> lw(static_cast<std::size_t>(L), -kInf);
  for (int l = 0; l < L; ++l) {
    const double env = log_envelope_inner(l, k);
    if (!(log_u < env)) continue;
    lw[static_cast<std::size_t>(l)] = state_.log_omega(l, k) - env + log_kernel(j, i, l);
  }
  return lw;
}

void SliceSampler::step_observational_labels() {
  ensure_atoms(state_.L_active);
  for (std::size_t j = 0; j < data_.num_units(); ++j) {
    for (std::size_t i = 0; i < state_.M[j].size(); ++i) {
      const auto lw = observational_log_weights(j, i);
      state_.M[j][i] = static_cast<int>(draw_categorical_log(rng_, lw));
    }
  }
}

void SliceSampler::step_atoms() {
  update_atoms(state_, data_, hyper_, state_.L_active, rng_);
}

ConcentrationUpdate SliceSampler::effective_concentration_update() const {
  if (config_.concentration_update == ConcentrationUpdate::label_marginal &&
      config_.envelope == EnvelopeKind::dependent) {
    return ConcentrationUpdate::stick_conditional;
  }
  return config_.concentration_update;
}

void SliceSampler::step_concentrations() {
  const ConcentrationUpdate mode = effective_concentration_update();
  if (mode == ConcentrationUpdate::label_marginal) {
    if (hyper_.alpha.is_fixed() && hyper_.beta.is_fixed()) return;
    const int K = state_.K_active;
    const int L = state_.L_active;
    std::vector<double> outer(static_cast<std::size_t>(K), 0.0);
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(L, K);
    for (std::size_t j = 0; j < state_.S.size(); ++j) {
      outer[static_cast<std::size_t>(state_.S[j])] += 1.0;
      for (int m : state_.M[j]) inner(m, state_.S[j]) += 1.0;
    }
    if (!hyper_.alpha.is_fixed()) {
      const std::vector<double> none(outer.size(), 0.0);
      const int closed = K == config_.max_K ? K - 1 : -1;
      state_.alpha = slice_sample_concentration(rng_, state_.alpha, hyper_.alpha.shape, hyper_.alpha.rate,
                                                [&](double c) { return log_gem_predictive(outer, none, c, closed); });
    }
    if (!hyper_.beta.is_fixed()) {
      const std::vector<double> none(static_cast<std::size_t>(L), 0.0);
      const int closed = L == config_.max_L ? L - 1 : -1;
      auto log_lik = [&](double c) {
        double out = 0.0;
        for (int k = 0; k < K; ++k) {
          if (outer[static_cast<std::size_t>(k)] == 0.0) continue;
          out += log_gem_predictive(std::span<const double>(inner.col(k).data(), static_cast<std::size_t>(L)), none,
                                    c, closed);
        }
        return out;
      };
      state_.beta = slice_sample_concentration(rng_, state_.beta, hyper_.beta.shape, hyper_.beta.rate, log_lik);
    }
    // The sticks were integrated out, so they are redrawn under the new values.
    draw_outer_sticks(K);
    draw_inner_sticks(K, L);
    return;
  }
  if (mode == ConcentrationUpdate::escobar_west) {
    if (!hyper_.alpha.is_fixed()) {
      std::vector<int> s = state_.S;
      std::sort(s.begin(), s.end());
      const int k = static_cast<int>(std::unique(s.begin(), s.end()) - s.begin());
      state_.alpha = escobar_west_update(rng_, state_.alpha, hyper_.alpha.shape, hyper_.alpha.rate,
                                         k, static_cast<double>(data_.num_units()));
    }
    if (!hyper_.beta.is_fixed()) {
      std::vector<int> m;
      for (const auto& row : state_.M) m.insert(m.end(), row.begin(), row.end());
      std::sort(m.begin(), m.end());
      const int k = static_cast<int>(std::unique(m.begin(), m.end()) - m.begin());
      state_.beta = escobar_west_update(rng_, state_.beta, hyper_.beta.shape, hyper_.beta.rate, k,
                                        static_cast<double>(data_.num_observations()));
    }
    return;
  }
  if (!hyper_.alpha.is_fixed()) {
    int free = 0;
    double sum = 0.0;
    for (double x : state_.log_1mv) {
      if (std::isinf(x)) continue;  // closing stick at the cap
      ++free;
      sum += x;
    }
    state_.alpha = concentration_from_sticks(rng_, hyper_.alpha.shape, hyper_.alpha.rate, free, sum);
  }
  if (!hyper_.beta.is_fixed()) {
    int free = 0;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < state_.log_1mu.cols(); ++c) {
      for (Eigen::Index r = 0; r < state_.log_1mu.rows(); ++r) {
        const double x = state_.log_1mu(r, c);
        if (std::isinf(x)) continue;
        ++free;
        sum += x;
      }
    }
    state_.beta = concentration_from_sticks(rng_, hyper_.beta.shape, hyper_.beta.rate, free, sum);
  }
}

void SliceSampler::step_regression() {
  update_regression(state_, data_, hyper_, rng_);
}

void SliceSampler::step_label_switch() {
  const int K = state_.K_active;
  if (K >= 2) {
    const int k1 = static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(K)));
    int k2 = static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(K - 1)));
    if (k2 >= k1) ++k2;
    const double g1 = state_.log_pi[static_cast<std::size_t>(k1)] - log_envelope_outer(k1);
    const double g2 = state_.log_pi[static_cast<std::size_t>(k2)] - log_envelope_outer(k2);
    double log_ratio = 0.0;
    for (std::size_t j = 0; j < state_.S.size() && log_ratio > -kInf; ++j) {
      const int s = state_.S[j];
      if (s != k1 && s != k2) continue;
      const int target = s == k1 ? k2 : k1;
      if (!(std::log(state_.uD[j]) < log_envelope_outer(target))) {
        log_ratio = -kInf;
      } else {
        log_ratio += s == k1 ? g2 - g1 : g1 - g2;
      }
    }
    ++outer_switch_tries_;
    if (log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio) {
      ++outer_switch_accepts_;
      for (int& s : state_.S) {
        if (s == k1) {
          s = k2;
        } else if (s == k2) {
          s = k1;
        }
      }
      state_.log_u.col(k1).swap(state_.log_u.col(k2));
      state_.log_1mu.col(k1).swap(state_.log_1mu.col(k2));
      state_.log_omega.col(k1).swap(state_.log_omega.col(k2));
    }
  }

  const int L = state_.L_active;
  if (L >= 2) {
    const int l1 = static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(L)));
    int l2 = static_cast<int>(rng_.uniform_index(static_cast<std::size_t>(L - 1)));
    if (l2 >= l1) ++l2;
    double log_ratio = 0.0;
    for (std::size_t j = 0; j < state_.M.size() && log_ratio > -kInf; ++j) {
      const int k = state_.S[j];
      const double g1 = state_.log_omega(l1, k) - log_envelope_inner(l1, k);
      const double g2 = state_.log_omega(l2, k) - log_envelope_inner(l2, k);
      for (std::size_t i = 0; i < state_.M[j].size(); ++i) {
        const int m = state_.M[j][i];
        if (m != l1 && m != l2) continue;
        const int target = m == l1 ? l2 : l1;
        if (!(std::log(state_.uO[j][i]) < log_envelope_inner(target, k))) {
          log_ratio = -kInf;
          break;
        }
        log_ratio += m == l1 ? g2 - g1 : g1 - g2;
      }
    }
    ++inner_switch_tries_;
    if (log_ratio >= 0.0 || std::log(rng_.uniform()) < log_ratio) {
      ++inner_switch_accepts_;
      for (auto& row : state_.M) {
        for (int& m : row) {
          if (m == l1) {
            m = l2;
          } else if (m == l2) {
            m = l1;
          }
        }
      }
      std::swap(state_.theta[static_cast<std::size_t>(l1)], state_.theta[static_cast<std::size_t>(l2)]);
    }
  }
}

double SliceSampler::outer_switch_rate() const {
  return outer_switch_tries_ == 0 ? 0.0
                                  : static_cast<double>(outer_switch_accepts_) / outer_switch_tries_;
}

double SliceSampler::inner_switch_rate() const {
  return inner_switch_tries_ == 0 ? 0.0
                                  : static_cast<double>(inner_switch_accepts_) / inner_switch_tries_;
}

void SliceSampler::check_finite() const {
  auto fail = [&](const std::string& what) {
    throw NumericError("non-finite " + what + " at sweep " + std::to_string(sweeps_));
  };
  if (!std::isfinite(state_.alpha) || !(state_.alpha > 0.0)) fail("alpha");
  if (!std::isfinite(state_.beta) || !(state_.beta > 0.0)) fail("beta");
  if (!std::isfinite(state_.reg_coeff)) fail("regression coefficient");
  for (const Atom& a : state_.theta) {
    if (!std::isfinite(a.mu) || !std::isfinite(a.sigma2) || !(a.sigma2 > 0.0)) fail("atom");
  }
  for (double lp : state_.log_pi) {
    if (std::isnan(lp)) fail("outer weight");
  }
  if (state_.log_omega.hasNaN()) fail("inner weight");
  for (const auto& row : state_.y_latent) {
    for (double y : row) {
      if (!std::isfinite(y)) fail("latent value");
    }
  }
}

DrawStore run_chain(const Dataset& data, const Hyperparameters& hyper, const SliceConfig& config,
                    int chain_index) {
  RngStream root(config.seed);
  SliceSampler sampler(data, hyper, config, root.split(static_cast<std::uint64_t>(chain_index)));

  DrawStore store;
  store.meta.sampler = "slice";
  store.meta.model = data.kind == DataKind::count ? "DCAM" : "CAM";
  store.meta.seed = config.seed;
  store.meta.chain = chain_index;
  store.meta.config = {
      {"iters", std::to_string(config.iters)},
      {"burnin", std::to_string(config.burnin)},
      {"thin", std::to_string(config.thin)},
      {"max_K", std::to_string(config.max_K)},
      {"max_L", std::to_string(config.max_L)},
      {"envelope", to_string(config.envelope)},
      {"concentration_update", to_string(sampler.effective_concentration_update())},
      {"label_switch", config.enable_label_switch ? "on" : "off"},
      {"collapsed_labels", config.collapsed_labels && config.envelope == EnvelopeKind::geometric ? "on" : "off"},
      {"init_inner", std::to_string(config.init_inner)},
      {"scaled", data.has_scale() ? "yes" : "no"},
  };
  for (auto& kv : describe(hyper)) store.meta.config.push_back(std::move(kv));
  for (const auto& u : data.units) store.unit_sizes.push_back(static_cast<int>(u.size()));

  const long total = config.burnin + config.iters;
  store.draws.reserve(static_cast<std::size_t>(config.iters / config.thin));
  double sum_K = 0.0;
  double sum_L = 0.0;
  for (long t = 1; t <= total; ++t) {
    try {
      sampler.sweep();
    } catch (const ParameterError& e) {
      // A draw fed non-finite parameters means the state has overflowed.
      throw NumericError(std::string(e.what()) + " at sweep " + std::to_string(t));
    }
    sampler.check_finite();
    sum_K += sampler.state().K_active;
    sum_L += sampler.state().L_active;
    if (t > config.burnin && (t - config.burnin) % config.thin == 0) {
      store.draws.push_back(project_state(sampler.state(), t));
    }
  }
  if (sampler.cap_hits() > 0) {
    const std::string msg = "truncation cap (max_K=" + std::to_string(config.max_K) +
                            ", max_L=" + std::to_string(config.max_L) + ") reached in " +
                            std::to_string(sampler.cap_hits()) + " sweeps";
    store.meta.warnings.push_back(msg);
  }
  store.meta.diagnostics["cap_hits"] = static_cast<double>(sampler.cap_hits());
  store.meta.diagnostics["mean_K_active"] = sum_K / static_cast<double>(total);
  store.meta.diagnostics["mean_L_active"] = sum_L / static_cast<double>(total);
  if (config.enable_label_switch) {
    store.meta.diagnostics["outer_switch_acceptance"] = sampler.outer_switch_rate();
    store.meta.diagnostics["inner_switch_acceptance"] = sampler.inner_switch_rate();
  }
  return store;
}

}  // namespace cam
