// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/gibbs_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cam/conditionals.hpp"
#include "cam/error.hpp"
#include "cam/prior.hpp"
#include "cam/slice_sampler.hpp"

namespace cam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> normalise_log(std::vector<double> lw) {
  const double z = log_sum_exp(lw);
  for (double& v : lw) v = std::exp(v - z);
  return lw;
}

}  // namespace

void GibbsConfig::validate() const {
  if (iters < 1) throw ValidationError("iters must be at least 1");
  if (burnin < 0) throw ValidationError("burnin must be non-negative");
  if (thin < 1) throw ValidationError("thin must be at least 1");
  if (thin > iters) throw ValidationError("thin must not exceed iters");
  if (levels.K < 1 || levels.L < 1) throw ValidationError("truncation levels must be at least 1");
  if (init_inner < 1) throw ValidationError("init_inner must be at least 1");
  if (concentration_update == ConcentrationUpdate::escobar_west) {
    throw ValidationError("the Gibbs sampler supports label_marginal or stick_conditional concentration updates");
  }
}

GibbsSampler::GibbsSampler(Dataset data, Hyperparameters hyper, GibbsConfig config, RngStream rng)
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

void GibbsSampler::initialise() {
  const std::size_t J = data_.num_units();
  const int K = config_.levels.K;
  const int L = config_.levels.L;
  state_ = SamplerState{};
  state_.alpha = hyper_.alpha.is_fixed() ? hyper_.alpha.value : hyper_.alpha.prior_mean();
  state_.beta = hyper_.beta.is_fixed() ? hyper_.beta.value : hyper_.beta.prior_mean();
  state_.reg_coeff = hyper_.regression ? hyper_.regression->mean : 0.0;
  state_.K_active = K;
  state_.L_active = L;

  state_.S.resize(J);
  for (std::size_t j = 0; j < J; ++j) state_.S[j] = static_cast<int>(j % static_cast<std::size_t>(K));
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
  const int bins = std::min(config_.init_inner, L);
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
  update_atoms(state_, data_, hyper_, L, rng_);
  step_weights();
}

void GibbsSampler::replace_observations(std::vector<std::vector<double>> units) {
  if (units.size() != data_.units.size()) throw ParameterError("unit count changed");
  for (std::size_t j = 0; j < units.size(); ++j) {
    if (units[j].size() != data_.units[j].size()) throw ParameterError("unit size changed");
  }
  data_.units = std::move(units);
  invalidate_kernels();
}

void GibbsSampler::sweep() {
  step_S();
  step_M();
  step_latent();
  if (config_.collapsed_labels) step_S_collapsed();
  step_weights();
  step_atoms();
  step_concentrations();
  step_regression();
  ++sweeps_;
}

void GibbsSampler::kernel_row(std::size_t j, double value, std::vector<double>& out) const {
  const int L = config_.levels.L;
  const double g = data_.scale_of(j);
  const double shift = state_.reg_coeff * data_.covariate_of(j);
  out.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const Atom& a = state_.theta[static_cast<std::size_t>(l)];
    if (data_.kind == DataKind::count) {
      out[static_cast<std::size_t>(l)] =
          dcam_log_cell_prob(static_cast<long>(value), a.mu + shift, a.sigma2, RoundingGrid{},
                             data_.has_scale() ? std::optional<double>(g) : std::nullopt);
    } else {
      out[static_cast<std::size_t>(l)] = normal_log_pdf(value / g - shift, a.mu, a.sigma2);
    }
  }
}

const GibbsSampler::UnitKernel& GibbsSampler::kernels(std::size_t j) const {
  if (!kernels_valid_) {
    const int L = config_.levels.L;
    kernels_.assign(data_.num_units(), UnitKernel{});
    std::vector<double> row;
    for (std::size_t u = 0; u < data_.num_units(); ++u) {
      UnitKernel& uk = kernels_[u];
      uk.values = data_.units[u];
      std::sort(uk.values.begin(), uk.values.end());
      uk.values.erase(std::unique(uk.values.begin(), uk.values.end()), uk.values.end());
      uk.index.resize(data_.units[u].size());
      for (std::size_t i = 0; i < data_.units[u].size(); ++i) {
        uk.index[i] = static_cast<int>(
            std::lower_bound(uk.values.begin(), uk.values.end(), data_.units[u][i]) -
            uk.values.begin());
      }
      uk.log_f.resize(static_cast<Eigen::Index>(uk.values.size()), L);
      for (std::size_t d = 0; d < uk.values.size(); ++d) {
        kernel_row(u, uk.values[d], row);
        for (int l = 0; l < L; ++l) uk.log_f(static_cast<Eigen::Index>(d), l) = row[static_cast<std::size_t>(l)];
      }
      uk.mult.assign(uk.values.size(), 0.0);
      for (int idx : uk.index) uk.mult[static_cast<std::size_t>(idx)] += 1.0;
      // Row-max scaling keeps the kernel-by-weight product in range.
      uk.row_max = uk.log_f.rowwise().maxCoeff();
      uk.scaled_f = (uk.log_f.colwise() - uk.row_max).array().exp().matrix();
    }
    kernels_valid_ = true;
  }
  return kernels_[j];
}

std::vector<double> GibbsSampler::S_log_weights(std::size_t j) const {
  return S_log_weights(j, state_.log_omega.array().exp().matrix());
}

std::vector<double> GibbsSampler::S_log_weights(std::size_t j, const Eigen::MatrixXd& omega) const {
  const int K = config_.levels.K;
  const int L = config_.levels.L;
  const UnitKernel& uk = kernels(j);
  const auto D = uk.log_f.rows();
  const auto& mult = uk.mult;
  const auto& row_max = uk.row_max;
  // Entries that underflow are recomputed in log space.
  const Eigen::MatrixXd A = uk.scaled_f * omega;

  std::vector<double> lw(static_cast<std::size_t>(K));
  std::vector<double> terms(static_cast<std::size_t>(L));
  for (int k = 0; k < K; ++k) {
    double v = state_.log_pi[static_cast<std::size_t>(k)];
    for (Eigen::Index d = 0; d < D; ++d) {
      double log_mix;
      if (A(d, k) > 0.0) {
        log_mix = std::log(A(d, k)) + row_max(d);
      } else {
        for (int l = 0; l < L; ++l) {
          terms[static_cast<std::size_t>(l)] = uk.log_f(d, l) + state_.log_omega(l, k);
        }
        log_mix = log_sum_exp(terms);
      }
      v += mult[static_cast<std::size_t>(d)] * log_mix;
    }
    lw[static_cast<std::size_t>(k)] = v;
  }
  return lw;
}

std::vector<double> GibbsSampler::S_probabilities(std::size_t j) const {
  return normalise_log(S_log_weights(j));
}

std::vector<double> GibbsSampler::M_probabilities(std::size_t j, std::size_t i) const {
  const int L = config_.levels.L;
  const UnitKernel& uk = kernels(j);
  const int d = uk.index[i];
  const int k = state_.S[j];
  std::vector<double> lw(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) lw[static_cast<std::size_t>(l)] = state_.log_omega(l, k) + uk.log_f(d, l);
  return normalise_log(std::move(lw));
}

void GibbsSampler::step_S() {
  const Eigen::MatrixXd omega = state_.log_omega.array().exp().matrix();
  for (std::size_t j = 0; j < data_.num_units(); ++j) {
    const auto lw = S_log_weights(j, omega);
    state_.S[j] = static_cast<int>(draw_categorical_log(rng_, lw));
  }
}

void GibbsSampler::step_M() {
  const int L = config_.levels.L;
  std::vector<double> lw(static_cast<std::size_t>(L));
  for (std::size_t j = 0; j < data_.num_units(); ++j) {
    const UnitKernel& uk = kernels(j);
    const int k = state_.S[j];
    for (std::size_t i = 0; i < state_.M[j].size(); ++i) {
      const int d = uk.index[i];
      for (int l = 0; l < L; ++l) lw[static_cast<std::size_t>(l)] = state_.log_omega(l, k) + uk.log_f(d, l);
      state_.M[j][i] = static_cast<int>(draw_categorical_log(rng_, lw));
    }
  }
}

void GibbsSampler::step_latent() {
  update_latent(state_, data_, rng_);
}

void GibbsSampler::step_S_collapsed() {
  const int L = config_.levels.L;
  auto log_prior = [&](std::size_t, int k) { return state_.log_pi[static_cast<std::size_t>(k)]; };
  update_S_collapsed(state_, config_.levels.K, L, state_.beta, L - 1, log_prior, rng_);
}

void GibbsSampler::step_weights() {
  const int K = config_.levels.K;
  const int L = config_.levels.L;
  std::vector<double> m(static_cast<std::size_t>(K), 0.0);
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(L, K);
  for (std::size_t j = 0; j < state_.S.size(); ++j) {
    m[static_cast<std::size_t>(state_.S[j])] += 1.0;
    for (int l : state_.M[j]) n(l, state_.S[j]) += 1.0;
  }

  state_.log_v.resize(static_cast<std::size_t>(K));
  state_.log_1mv.resize(static_cast<std::size_t>(K));
  state_.log_pi.resize(static_cast<std::size_t>(K));
  double tail = std::accumulate(m.begin(), m.end(), 0.0);
  double log_rest = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    tail -= m[kk];
    const LogStick st = k == K - 1 ? LogStick{0.0, -kInf}
                                   : draw_log_beta(rng_, 1.0 + m[kk], state_.alpha + tail);
    state_.log_v[kk] = st.log_v;
    state_.log_1mv[kk] = st.log_1mv;
    state_.log_pi[kk] = log_rest + st.log_v;
    log_rest += st.log_1mv;
  }

  state_.log_u.resize(L, K);
  state_.log_1mu.resize(L, K);
  state_.log_omega.resize(L, K);
  for (int k = 0; k < K; ++k) {
    double inner_tail = n.col(k).sum();
    double inner_rest = 0.0;
    for (int l = 0; l < L; ++l) {
      inner_tail -= n(l, k);
      const LogStick st = l == L - 1 ? LogStick{0.0, -kInf}
                                     : draw_log_beta(rng_, 1.0 + n(l, k), state_.beta + inner_tail);
      state_.log_u(l, k) = st.log_v;
      state_.log_1mu(l, k) = st.log_1mv;
      state_.log_omega(l, k) = inner_rest + st.log_v;
      inner_rest += st.log_1mv;
    }
  }
}

void GibbsSampler::step_atoms() {
  update_atoms(state_, data_, hyper_, config_.levels.L, rng_);
  invalidate_kernels();
}

void GibbsSampler::step_concentrations() {
  const int K = config_.levels.K;
  const int L = config_.levels.L;
  if (config_.concentration_update == ConcentrationUpdate::label_marginal) {
    if (hyper_.alpha.is_fixed() && hyper_.beta.is_fixed()) return;
    std::vector<double> outer(static_cast<std::size_t>(K), 0.0);
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(L, K);
    for (std::size_t j = 0; j < state_.S.size(); ++j) {
      outer[static_cast<std::size_t>(state_.S[j])] += 1.0;
      for (int m : state_.M[j]) inner(m, state_.S[j]) += 1.0;
    }
    if (!hyper_.alpha.is_fixed()) {
      const std::vector<double> none(outer.size(), 0.0);
      state_.alpha = slice_sample_concentration(rng_, state_.alpha, hyper_.alpha.shape, hyper_.alpha.rate,
                                                [&](double c) { return log_gem_predictive(outer, none, c, K - 1); });
    }
    if (!hyper_.beta.is_fixed()) {
      const std::vector<double> none(static_cast<std::size_t>(L), 0.0);
      auto log_lik = [&](double c) {
        double out = 0.0;
        for (int k = 0; k < K; ++k) {
          if (outer[static_cast<std::size_t>(k)] == 0.0) continue;
          out += log_gem_predictive(std::span<const double>(inner.col(k).data(), static_cast<std::size_t>(L)), none,
                                    c, L - 1);
        }
        return out;
      };
      state_.beta = slice_sample_concentration(rng_, state_.beta, hyper_.beta.shape, hyper_.beta.rate, log_lik);
    }
    step_weights();
    return;
  }
  if (!hyper_.alpha.is_fixed()) {
    double sum = 0.0;
    for (int k = 0; k + 1 < K; ++k) sum += state_.log_1mv[static_cast<std::size_t>(k)];
    state_.alpha = concentration_from_sticks(rng_, hyper_.alpha.shape, hyper_.alpha.rate, K - 1, sum);
  }
  if (!hyper_.beta.is_fixed()) {
    const double sum = L > 1 ? state_.log_1mu.topRows(L - 1).sum() : 0.0;
    state_.beta = concentration_from_sticks(rng_, hyper_.beta.shape, hyper_.beta.rate, K * (L - 1), sum);
  }
}

void GibbsSampler::step_regression() {
  if (!hyper_.regression || !data_.has_covariate()) return;
  update_regression(state_, data_, hyper_, rng_);
  invalidate_kernels();
}

void GibbsSampler::check_finite() const {
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

DrawStore run_gibbs_chain(const Dataset& data, const Hyperparameters& hyper,
                          const GibbsConfig& config, int chain_index) {
  RngStream root(config.seed);
  GibbsSampler sampler(data, hyper, config, root.split(static_cast<std::uint64_t>(chain_index)));

  DrawStore store;
  store.meta.sampler = "gibbs";
  store.meta.model = data.kind == DataKind::count ? "TDCAM" : "TCAM";
  store.meta.seed = config.seed;
  store.meta.chain = chain_index;
  store.meta.config = {
      {"iters", std::to_string(config.iters)},
      {"burnin", std::to_string(config.burnin)},
      {"thin", std::to_string(config.thin)},
      {"K", std::to_string(config.levels.K)},
      {"L", std::to_string(config.levels.L)},
      {"init_inner", std::to_string(config.init_inner)},
      {"collapsed_labels", config.collapsed_labels ? "on" : "off"},
      {"concentration_update", to_string(config.concentration_update)},
      {"scaled", data.has_scale() ? "yes" : "no"},
  };
  for (auto& kv : describe(hyper)) store.meta.config.push_back(std::move(kv));
  for (const auto& u : data.units) store.unit_sizes.push_back(static_cast<int>(u.size()));
  store.meta.diagnostics["truncation_bound"] = truncation_bound_mixture(
      hyper.alpha.prior_mean(), hyper.beta.prior_mean(), config.levels.K, config.levels.L,
      static_cast<long>(data.num_observations()));

  const long total = config.burnin + config.iters;
  store.draws.reserve(static_cast<std::size_t>(config.iters / config.thin));
  for (long t = 1; t <= total; ++t) {
    try {
      sampler.sweep();
    } catch (const ParameterError& e) {
      // A draw fed non-finite parameters means the state has overflowed.
      throw NumericError(std::string(e.what()) + " at sweep " + std::to_string(t));
    }
    sampler.check_finite();
    if (t > config.burnin && (t - config.burnin) % config.thin == 0) {
      store.draws.push_back(project_state(sampler.state(), t));
    }
  }
  return store;
}

}  // namespace cam
