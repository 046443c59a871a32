// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "cam/conditionals.hpp"
#include "cam/error.hpp"
#include "cam/slice_sampler.hpp"
#include "cam/summary.hpp"
#include "oracles.hpp"

using namespace cam;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Dataset small_continuous() {
  Dataset d;
  d.units = {{0.1, -0.3, 0.2}, {5.1, 4.8, 5.3}, {0.0, 5.0, 0.4}};
  return d;
}

Hyperparameters fixed_hyper(double alpha = 1.0, double beta = 1.0) {
  Hyperparameters h;
  h.alpha = ConcentrationPrior::fixed_at(alpha);
  h.beta = ConcentrationPrior::fixed_at(beta);
  return h;
}

SliceSampler make_sampler(Dataset d, Hyperparameters h, std::uint64_t seed = 1) {
  SliceConfig cfg;
  cfg.iters = 10;
  cfg.burnin = 0;
  return SliceSampler(std::move(d), std::move(h), cfg, RngStream(seed));
}

std::vector<double> normalise(const std::vector<double>& lw) {
  double m = -kInf;
  for (double x : lw) m = std::max(m, x);
  std::vector<double> p(lw.size());
  double s = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) s += p[i] = std::exp(lw[i] - m);
  for (double& x : p) x /= s;
  return p;
}

// Outer weights and inner weight columns given directly as probabilities.
void set_weights(SamplerState& s, const std::vector<double>& pi, const std::vector<std::vector<double>>& omega) {
  const int K = static_cast<int>(pi.size());
  const int L = static_cast<int>(omega.front().size());
  s.log_pi.resize(pi.size());
  for (std::size_t k = 0; k < pi.size(); ++k) s.log_pi[k] = std::log(pi[k]);
  s.log_omega.resize(L, K);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) s.log_omega(l, k) = std::log(omega[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)]);
  }
  s.K_active = K;
  s.L_active = L;
}

}  // namespace

TEST_CASE("slice threshold and admissible count") {
  CHECK(slice_threshold(0.01, 0.5) == 5);
  CHECK(slice_threshold(0.001, 0.5) == 8);
  CHECK(slice_threshold(0.5, 0.5) == 1);
  RngStream rng(1);
  for (int t = 0; t < 20000; ++t) {
    const double kappa = rng.uniform(0.05, 0.95);
    const double u = std::exp(rng.uniform(-40.0, 0.0));
    int brute = 0;
    for (int k = 1; k < 5000 && xi(k, kappa) > u; ++k) brute = k;
    REQUIRE(admissible_count(u, kappa) == brute);
    // Every label past the count is excluded by the slice.
    CHECK(xi(brute + 1, kappa) <= u);
  }
}

TEST_CASE("slice variables stay under their envelopes") {
  auto sampler = make_sampler(small_continuous(), fixed_hyper());
  auto& s = sampler.state();
  s.S = {0, 0, 0};
  s.M = {{2, 2, 2}, {0, 1, 2}, {0, 0, 0}};
  for (int t = 0; t < 2000; ++t) {
    sampler.step_slice_variables();
    for (double u : s.uD) {
      REQUIRE(u > 0.0);
      REQUIRE(u < 0.5);
    }
    for (double u : s.uO[0]) {
      REQUIRE(u > 0.0);
      REQUIRE(u < 0.125);
    }
  }
  const auto c = sampler.compute_active_counts();
  CHECK(c.K >= 1);
  CHECK(c.L >= 3);
}

TEST_CASE("outer sticks follow their Beta conditionals") {
  auto sampler = make_sampler(small_continuous(), fixed_hyper(1.0, 1.0));
  auto& s = sampler.state();
  s.S = {0, 0, 1};
  s.K_active = 3;
  std::vector<double> v0, v2;
  for (int t = 0; t < 40000; ++t) {
    sampler.step_outer_sticks();
    v0.push_back(std::exp(s.log_v[0]));
    v2.push_back(std::exp(s.log_v[2]));
  }
  // S = (1, 1, 2): Beta(1 + 2, alpha + 1) and an empty cluster Beta(1, alpha).
  const auto a = cam::testing::sample_stats(v0);
  CHECK(std::abs(a.mean - 3.0 / 5.0) < 4.0 * a.se);
  CHECK(std::abs(a.variance - 3.0 * 2.0 / (25.0 * 6.0)) < 0.05 * a.variance);
  const auto b = cam::testing::sample_stats(v2);
  CHECK(std::abs(b.mean - 0.5) < 4.0 * b.se);

  s.S = {0, 0, 0};
  v2.clear();
  for (int t = 0; t < 40000; ++t) {
    sampler.step_outer_sticks();
    v2.push_back(std::exp(s.log_v[1]));
  }
  CHECK(std::abs(cam::testing::sample_stats(v2).mean - 0.5) < 0.01);
}

TEST_CASE("inner sticks use tail counts within the cluster") {
  Dataset d;
  d.units = {{0.0, 0.1, 0.2, 0.3, 0.4}, {1.0}};
  auto sampler = make_sampler(d, fixed_hyper(1.0, 2.0));
  auto& s = sampler.state();
  s.S = {0, 1};
  s.M = {{0, 0, 0, 0, 1}, {1}};
  s.K_active = 3;
  s.L_active = 3;
  std::vector<double> u00, u01, u02;
  for (int t = 0; t < 40000; ++t) {
    sampler.step_inner_sticks();
    u00.push_back(std::exp(s.log_u(0, 0)));
    u01.push_back(std::exp(s.log_u(1, 0)));
    u02.push_back(std::exp(s.log_u(0, 2)));
  }
  // n_{1,k} = 4, n_{2,k} = 1: stick 1 ~ Beta(5, beta + 1), stick 2 ~ Beta(2, beta).
  const auto a = cam::testing::sample_stats(u00);
  CHECK(std::abs(a.mean - 5.0 / 8.0) < 4.0 * a.se);
  const auto b = cam::testing::sample_stats(u01);
  CHECK(std::abs(b.mean - 2.0 / 4.0) < 4.0 * b.se);
  // Empty cluster: prior Beta(1, beta).
  const auto c = cam::testing::sample_stats(u02);
  CHECK(std::abs(c.mean - 1.0 / 3.0) < 4.0 * c.se);
}

TEST_CASE("distributional label conditional") {
  Dataset d;
  d.units = {{0.0}};
  auto sampler = make_sampler(d, fixed_hyper());
  auto& s = sampler.state();
  s.M = {{0}};

  SUBCASE("single admissible cluster") {
    set_weights(s, {0.5, 0.25}, {{0.8, 0.2}, {0.2, 0.8}});
    s.uD = {0.3};  // only xi_1 = 0.5 exceeds u
    for (int t = 0; t < 100; ++t) {
      sampler.step_distributional_labels();
      CHECK(s.S[0] == 0);
    }
  }
  SUBCASE("hand normalisation 0.8 / 0.2") {
    // pi / xi equal for both clusters, so only the inner weights matter.
    set_weights(s, {0.5, 0.25}, {{0.8, 0.2}, {0.2, 0.8}});
    s.uD = {1e-3};
    const auto p = normalise(sampler.distributional_log_weights(0));
    CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-12));
    double hits = 0.0;
    for (int t = 0; t < 10000; ++t) {
      sampler.step_distributional_labels();
      hits += s.S[0] == 0;
    }
    CHECK(std::abs(hits / 10000 - 0.8) < 0.015);
  }
  SUBCASE("symmetric clusters split evenly") {
    set_weights(s, {0.5, 0.25}, {{0.5, 0.5}, {0.5, 0.5}});
    s.uD = {1e-3};
    double hits = 0.0;
    for (int t = 0; t < 10000; ++t) {
      sampler.step_distributional_labels();
      hits += s.S[0] == 0;
    }
    CHECK(std::abs(hits / 10000 - 0.5) < 0.015);
  }
}

TEST_CASE("slice S update leaves the exact label conditional invariant") {
  // Alternating u | S and S | u must reproduce P(S = k) proportional to
  // pi_k prod_i omega(M_i, k) once the slice variable is integrated out.
  Dataset d;
  d.units = {{0.0, 0.0, 0.0}};
  auto sampler = make_sampler(d, fixed_hyper());
  auto& s = sampler.state();
  const std::vector<double> pi = {0.5, 0.3, 0.2};
  const std::vector<std::vector<double>> omega = {{0.7, 0.3}, {0.4, 0.6}, {0.1, 0.9}};
  set_weights(s, pi, omega);
  s.M = {{0, 1, 1}};
  s.S = {0};
  std::vector<double> target(3);
  double z = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    z += target[kk] = pi[kk] * omega[kk][0] * omega[kk][1] * omega[kk][1];
  }
  RngStream rng(12);
  std::vector<double> freq(3, 0.0);
  const int n = 200000;
  for (int t = 0; t < n; ++t) {
    s.uD[0] = rng.uniform() * xi(s.S[0] + 1, sampler.hyper().kappa_D);
    sampler.step_distributional_labels();
    freq[static_cast<std::size_t>(s.S[0])] += 1.0;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    CAPTURE(k);
    CHECK(std::abs(freq[k] / n - target[k] / z) < 0.01);
  }
}

TEST_CASE("observational label conditional") {
  Dataset d;
  d.units = {{0.0}};
  auto sampler = make_sampler(d, fixed_hyper());
  auto& s = sampler.state();
  s.S = {0};
  set_weights(s, {1.0}, {{0.5, 0.25, 0.25}});
  // Normal densities at y = 0 in the ratio 3 : 1.
  s.theta = {{0.0, 1.0}, {std::sqrt(2.0 * std::log(3.0)), 1.0}, {0.0, 1.0}};
  s.L_active = 2;

  SUBCASE("kernel ratio 0.75 / 0.25") {
    s.uO = {{1e-3}};
    const auto p = normalise(sampler.observational_log_weights(0, 0));
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-12));
    double hits = 0.0;
    for (int t = 0; t < 20000; ++t) {
      sampler.step_observational_labels();
      hits += s.M[0][0] == 0;
    }
    // Three binomial SEs at 20000 draws.
    CHECK(std::abs(hits / 20000 - 0.75) < 3.0 * std::sqrt(0.75 * 0.25 / 20000));
  }
  SUBCASE("single admissible atom") {
    s.uO = {{0.3}};
    for (int t = 0; t < 100; ++t) {
      sampler.step_observational_labels();
      CHECK(s.M[0][0] == 0);
    }
  }
  SUBCASE("alternating slice and label draws hit the exact conditional") {
    set_weights(s, {1.0}, {{0.6, 0.3, 0.1}});
    s.theta = {{0.0, 1.0}, {1.0, 0.5}, {-0.5, 2.0}};
    std::vector<double> target(3);
    double z = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
      z += target[l] = std::exp(s.log_omega(static_cast<Eigen::Index>(l), 0) +
                                normal_log_pdf(0.0, s.theta[l].mu, s.theta[l].sigma2));
    }
    RngStream rng(4);
    std::vector<double> freq(3, 0.0);
    s.M = {{0}};
    const int n = 200000;
    for (int t = 0; t < n; ++t) {
      s.uO[0][0] = rng.uniform() * xi(s.M[0][0] + 1, sampler.hyper().kappa_O);
      sampler.step_observational_labels();
      freq[static_cast<std::size_t>(s.M[0][0])] += 1.0;
    }
    for (std::size_t l = 0; l < 3; ++l) CHECK(std::abs(freq[l] / n - target[l] / z) < 0.01);
  }
}

TEST_CASE("GEM predictive matches the sequential urn") {
  // Chain rule: each new label has probability E[omega_l | counts so far].
  auto urn = [](std::vector<double> others, const std::vector<int>& labels, double beta, int closed) {
    double out = 0.0;
    for (int l : labels) {
      double p = 1.0;
      for (int m = 0; m <= l; ++m) {
        double tail = 0.0;
        for (std::size_t q = static_cast<std::size_t>(m) + 1; q < others.size(); ++q) tail += others[q];
        const double n = others[static_cast<std::size_t>(m)];
        const double mean_v = m == closed ? 1.0 : (1.0 + n) / (1.0 + beta + n + tail);
        p *= m == l ? mean_v : 1.0 - mean_v;
      }
      out += std::log(p);
      others[static_cast<std::size_t>(l)] += 1.0;
    }
    return out;
  };
  RngStream rng(17);
  for (int t = 0; t < 300; ++t) {
    const std::size_t L = 1 + rng.uniform_index(6);
    const int closed = rng.uniform() < 0.5 ? static_cast<int>(L) - 1 : -1;
    std::vector<double> others(L), unit(L, 0.0);
    for (double& x : others) x = static_cast<double>(rng.uniform_index(4));
    std::vector<int> labels(1 + rng.uniform_index(6));
    for (int& l : labels) {
      l = static_cast<int>(rng.uniform_index(L));
      unit[static_cast<std::size_t>(l)] += 1.0;
    }
    const double beta = rng.uniform(0.2, 5.0);
    CHECK(log_gem_predictive(unit, others, beta, closed) ==
          doctest::Approx(urn(others, labels, beta, closed)).epsilon(1e-10));
  }
  CHECK(log_gem_predictive(std::vector<double>{0.0, 0.0}, std::vector<double>{3.0, 1.0}, 1.0, -1) == 0.0);
}

TEST_CASE("S weights with M summed out") {
  Dataset d;
  d.units = {{0.2, 1.7}};
  auto sampler = make_sampler(d, fixed_hyper());
  auto& s = sampler.state();
  set_weights(s, {0.5, 0.3}, {{0.6, 0.3, 0.1}, {0.2, 0.2, 0.6}});
  s.theta = {{0.0, 1.0}, {2.0, 0.5}, {1.0, 2.0}};
  s.M = {{0, 1}};
  s.uD = {0.2};
  s.uO = {{0.3, 0.1}};  // admits atoms {0} and {0, 1, 2}
  const double kappa = 0.5;
  std::vector<double> brute(2, 0.0);
  for (int k = 0; k < 2; ++k) {
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (!(s.uO[0][0] < xi(a + 1, kappa)) || !(s.uO[0][1] < xi(b + 1, kappa))) continue;
        total += std::exp(s.log_omega(a, k) - log_xi(a + 1, kappa) +
                          normal_log_pdf(0.2, s.theta[static_cast<std::size_t>(a)].mu, s.theta[static_cast<std::size_t>(a)].sigma2) +
                          s.log_omega(b, k) - log_xi(b + 1, kappa) +
                          normal_log_pdf(1.7, s.theta[static_cast<std::size_t>(b)].mu, s.theta[static_cast<std::size_t>(b)].sigma2));
      }
    }
    brute[static_cast<std::size_t>(k)] = std::exp(s.log_pi[static_cast<std::size_t>(k)] - log_xi(k + 1, kappa)) * total;
  }
  const auto lw = sampler.distributional_log_weights_marginal(0);
  CHECK(std::exp(lw[0]) == doctest::Approx(brute[0]).epsilon(1e-12));
  CHECK(std::exp(lw[1]) == doctest::Approx(brute[1]).epsilon(1e-12));
  // xi_2 = 0.25, so u^D = 0.3 leaves only the first cluster.
  s.uD = {0.3};
  CHECK(sampler.distributional_log_weights_marginal(0)[1] == -kInf);
}

TEST_CASE("NIG atom update") {
  Hyperparameters h;
  h.m0 = 1.5;
  h.k0 = 1.0;
  h.a0 = 3.0;
  h.b0 = 2.0;
  const NigParams prior = nig_posterior(h, 0.0, 0.0, 0.0);
  CHECK(prior.m == 1.5);
  CHECK(prior.k == 1.0);
  const NigParams one = nig_posterior(h, 1.0, 1.5, 0.0);
  CHECK(one.m == doctest::Approx(1.5));
  CHECK(one.k == doctest::Approx(2.0));
  CHECK(one.a == doctest::Approx(3.5));
  CHECK(one.b == doctest::Approx(2.0));

  // Ten thousand N(2, 1) values on one atom.
  Dataset d;
  RngStream rng(3);
  d.units.emplace_back();
  for (int i = 0; i < 10000; ++i) d.units[0].push_back(draw_normal(rng, 2.0, 1.0));
  SamplerState s;
  s.S = {0};
  s.M = {std::vector<int>(10000, 0)};
  s.theta = {{0.0, 1.0}, {0.0, 1.0}};
  std::vector<double> mu;
  std::vector<double> empty_mu;
  for (int t = 0; t < 2000; ++t) {
    update_atoms(s, d, h, 2, rng);
    mu.push_back(s.theta[0].mu);
    empty_mu.push_back(s.theta[1].mu);
  }
  CHECK(std::abs(cam::testing::sample_stats(mu).mean - 2.0) < 0.05);
  // The empty atom is drawn from the prior: E[mu] = m0.
  const auto e = cam::testing::sample_stats(empty_mu);
  CHECK(std::abs(e.mean - 1.5) < 4.0 * e.se);
}

TEST_CASE("latent values respect the rounding cells") {
  Dataset d;
  d.kind = DataKind::count;
  d.units = {{0, 5, 1}};
  SamplerState s;
  s.S = {0};
  s.M = {{0, 0, 0}};
  s.theta = {{2.0, 4.0}};
  s.y_latent = {{0.0, 0.0, 0.0}};
  RngStream rng(9);
  std::vector<double> y5;
  for (int t = 0; t < 20000; ++t) {
    update_latent(s, d, rng);
    REQUIRE(s.y_latent[0][0] < 0.0);
    REQUIRE(s.y_latent[0][1] >= 4.0);
    REQUIRE(s.y_latent[0][1] < 5.0);
    REQUIRE(s.y_latent[0][2] >= 0.0);
    REQUIRE(s.y_latent[0][2] < 1.0);
    y5.push_back(s.y_latent[0][1]);
  }
  std::vector<double> oracle;
  for (int t = 0; t < 20000; ++t) oracle.push_back(cam::testing::rejection_truncated_normal(rng, 2.0, 2.0, 4.0, 5.0));
  const auto a = cam::testing::sample_stats(y5);
  const auto b = cam::testing::sample_stats(oracle);
  CHECK(std::abs(a.mean - b.mean) < 3.0 * std::hypot(a.se, b.se));
}

TEST_CASE("concentration updates") {
  CHECK(escobar_west_mixture_weight(3, 3, 2, 10, 0.5) == doctest::Approx(0.09772).epsilon(1e-4));
  const double odds = 4.0 / (10.0 * (3.0 - std::log(0.5)));
  CHECK(odds == doctest::Approx(0.10831).epsilon(1e-4));
  CHECK(escobar_west_mixture_weight(3, 3, 2, 10, 0.5) == doctest::Approx(odds / (1 + odds)).epsilon(1e-14));

  RngStream rng(5);
  std::vector<double> g0, g2;
  for (int t = 0; t < 50000; ++t) {
    g0.push_back(concentration_from_sticks(rng, 3.0, 3.0, 0, 0.0));
    g2.push_back(concentration_from_sticks(rng, 3.0, 3.0, 2, 2.0 * std::log(0.5)));
  }
  CHECK(std::abs(cam::testing::sample_stats(g0).mean - 1.0) < 0.02);
  CHECK(std::abs(cam::testing::sample_stats(g2).mean - 5.0 / (3.0 - 2.0 * std::log(0.5))) < 0.02);

  // Slice sampling on log c: the prior alone, then the prior times the label
  // probability of counts (2, 1), checked against quadrature.
  std::vector<double> prior_only, with_labels;
  double c0 = 1.0, c1 = 1.0;
  const std::vector<double> counts = {2.0, 1.0};
  const std::vector<double> none = {0.0, 0.0};
  for (int t = 0; t < 60000; ++t) {
    c0 = slice_sample_concentration(rng, c0, 3.0, 2.0, [](double) { return 0.0; });
    c1 = slice_sample_concentration(rng, c1, 3.0, 2.0,
                                    [&](double c) { return log_gem_predictive(counts, none, c, -1); });
    prior_only.push_back(c0);
    with_labels.push_back(c1);
  }
  const auto p0 = cam::testing::sample_stats(prior_only);
  CHECK(std::abs(p0.mean - 1.5) < 0.04);
  CHECK(std::abs(p0.variance - 0.75) < 0.06);
  // B(3, c + 1) / B(1, c) = 2c / ((c + 1)(c + 2)(c + 3)) and B(2, c) / B(1, c) = 1 / (c + 1).
  double num = 0.0, den = 0.0;
  for (double c = 1e-4; c < 40.0; c += 1e-3) {
    const double lik = 2.0 * c / ((c + 1.0) * (c + 1.0) * (c + 2.0) * (c + 3.0));
    const double w = c * c * std::exp(-2.0 * c) * lik;
    num += c * w;
    den += w;
  }
  CHECK(std::abs(cam::testing::sample_stats(with_labels).mean - num / den) < 0.04);

  // Fixed concentrations are left alone.
  auto sampler = make_sampler(small_continuous(), fixed_hyper(0.7, 1.3));
  sampler.step_concentrations();
  CHECK(sampler.state().alpha == 0.7);
  CHECK(sampler.state().beta == 1.3);
}

TEST_CASE("regression conditional") {
  Dataset d;
  d.units = {{2.0}};
  d.covariate = {1.0};
  SamplerState s;
  s.S = {0};
  s.M = {{0}};
  s.theta = {{0.0, 1.0}};
  const NormalParams p = regression_posterior(s, d, RegressionPrior{0.0, 1.0});
  CHECK(p.mean == doctest::Approx(1.0));
  CHECK(p.variance == doctest::Approx(0.5));

  d.covariate = {0.0};
  const NormalParams q = regression_posterior(s, d, RegressionPrior{0.3, 2.0});
  CHECK(q.mean == doctest::Approx(0.3));
  CHECK(q.variance == doctest::Approx(0.5));

  d.covariate = {1.0};
  const NormalParams r = regression_posterior(s, d, RegressionPrior{0.3, 1e12});
  CHECK(r.mean == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("run_chain bookkeeping and reproducibility") {
  const Dataset d = small_continuous();
  const Hyperparameters h = default_hyperparameters(d);
  SliceConfig cfg;
  cfg.iters = 10;
  cfg.thin = 2;
  cfg.burnin = 5;
  cfg.seed = 3;
  const DrawStore a = run_chain(d, h, cfg);
  CHECK(a.size() == 5);
  CHECK(a.draws.front().sweep == 7);
  const DrawStore b = run_chain(d, h, cfg);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a.draws[t].S == b.draws[t].S);
    CHECK(a.draws[t].M == b.draws[t].M);
    CHECK(a.draws[t].alpha == b.draws[t].alpha);
  }
  const DrawStore other = run_chain(d, h, cfg, 1);
  bool differs = false;
  for (std::size_t t = 0; t < a.size(); ++t) differs = differs || a.draws[t].alpha != other.draws[t].alpha;
  CHECK(differs);

  cfg.thin = 0;
  CHECK_THROWS_AS(run_chain(d, h, cfg), ValidationError);
}

TEST_CASE("state invariants hold after every sweep") {
  Dataset d;
  d.kind = DataKind::count;
  RngStream gen(8);
  for (int j = 0; j < 4; ++j) {
    d.units.emplace_back();
    for (int i = 0; i < 25; ++i) d.units.back().push_back(std::floor(gen.uniform(0.0, j % 2 ? 3.0 : 30.0)));
  }
  for (auto env : {EnvelopeKind::geometric, EnvelopeKind::dependent}) {
    CAPTURE(to_string(env));
    SliceConfig cfg;
    cfg.envelope = env;
    cfg.enable_label_switch = true;
    SliceSampler sampler(d, default_hyperparameters(d), cfg, RngStream(2));
    const RoundingGrid grid;
    for (int t = 0; t < 300; ++t) {
      sampler.sweep();
      const SamplerState& s = sampler.state();
      REQUIRE(s.num_outer() == s.K_active);
      REQUIRE(s.num_inner() == s.L_active);
      for (double lp : s.log_pi) REQUIRE(lp <= 0.0);
      for (std::size_t j = 0; j < d.units.size(); ++j) {
        REQUIRE(s.S[j] >= 0);
        REQUIRE(s.S[j] < s.K_active);
        REQUIRE(s.uD[j] > 0.0);
        const double env_outer = env == EnvelopeKind::geometric ? xi(s.S[j] + 1, 0.5)
                                                                 : std::exp(s.log_pi[static_cast<std::size_t>(s.S[j])]);
        REQUIRE(s.uD[j] < env_outer);
        for (std::size_t i = 0; i < d.units[j].size(); ++i) {
          const int m = s.M[j][i];
          REQUIRE(m >= 0);
          REQUIRE(m < s.L_active);
          const double env_inner = env == EnvelopeKind::geometric ? xi(m + 1, 0.5) : std::exp(s.log_omega(m, s.S[j]));
          REQUIRE(s.uO[j][i] < env_inner);
          const auto z = static_cast<long>(d.units[j][i]);
          REQUIRE(s.y_latent[j][i] >= grid.lower(z));
          REQUIRE(s.y_latent[j][i] < grid.upper(z));
        }
      }
      for (Eigen::Index k = 0; k < s.log_omega.cols(); ++k) {
        const double total = s.log_omega.col(k).array().exp().sum();
        REQUIRE(total <= 1.0 + 1e-12);
      }
    }
    CHECK(sampler.outer_switch_rate() >= 0.0);
    CHECK(sampler.outer_switch_rate() <= 1.0);
  }
}

TEST_CASE("caps close the last stick and are reported") {
  Dataset d;
  RngStream gen(1);
  for (int j = 0; j < 6; ++j) {
    d.units.emplace_back();
    for (int i = 0; i < 20; ++i) d.units.back().push_back(draw_normal(gen, 10.0 * j, 0.3));
  }
  SliceConfig cfg;
  cfg.max_K = 2;
  cfg.max_L = 3;
  cfg.iters = 50;
  cfg.burnin = 0;
  const DrawStore store = run_chain(d, default_hyperparameters(d), cfg);
  CHECK(store.meta.diagnostics.at("cap_hits") > 0.0);
  CHECK_FALSE(store.meta.warnings.empty());
  for (const Draw& dr : store.draws) {
    double total = 0.0;
    for (double p : dr.pi) total += p;
    CHECK(dr.K_active <= 2);
    CHECK(dr.L_active <= 3);
    if (dr.K_active == 2) CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("label switching accepts swaps of identical clusters") {
  Dataset d;
  d.units = {{0.0}, {0.1}};
  auto sampler = make_sampler(d, fixed_hyper());
  auto& s = sampler.state();
  set_weights(s, {0.5, 0.25}, {{1.0}, {1.0}});
  s.S = {0, 1};
  s.M = {{0}, {0}};
  s.uD = {1e-3, 1e-3};
  s.uO = {{1e-3}, {1e-3}};
  s.log_u = Eigen::MatrixXd::Zero(1, 2);
  s.log_1mu = Eigen::MatrixXd::Constant(1, 2, -kInf);
  for (int t = 0; t < 50; ++t) sampler.step_label_switch();
  CHECK(sampler.outer_switch_rate() == 1.0);
}

TEST_CASE("label switching does not change the co-clustering posterior") {
  Dataset d;
  d.units = {{0.1, 0.3, -0.2, 2.9, 3.1}, {0.0, 0.2, 3.0, 3.2, 2.8}};
  const Hyperparameters h = default_hyperparameters(d);
  SliceConfig cfg;
  cfg.iters = 40000;
  cfg.burnin = 2000;
  cfg.seed = 21;
  const auto off = coclustering(run_chain(d, h, cfg), ClusterLevel::distributional);
  const auto off_obs = coclustering(run_chain(d, h, cfg), ClusterLevel::observational);
  cfg.enable_label_switch = true;
  cfg.seed = 22;
  const DrawStore on_store = run_chain(d, h, cfg);
  const auto on = coclustering(on_store, ClusterLevel::distributional);
  const auto on_obs = coclustering(on_store, ClusterLevel::observational);
  CHECK(std::abs(off.matrix(0, 1) - on.matrix(0, 1)) < 0.05);
  CHECK((off_obs.matrix - on_obs.matrix).cwiseAbs().maxCoeff() < 0.05);
  CHECK(on_store.meta.diagnostics.at("outer_switch_acceptance") >= 0.0);
  CHECK(on_store.meta.diagnostics.at("outer_switch_acceptance") <= 1.0);
}

TEST_CASE("dependent envelopes agree with geometric ones") {
  Dataset d;
  d.units = {{0.1, 0.3, -0.2, 2.9}, {0.0, 0.2, 3.0, 3.2}, {5.0, 5.2, 4.9, 5.1}};
  const Hyperparameters h = default_hyperparameters(d);
  SliceConfig cfg;
  cfg.iters = 30000;
  cfg.burnin = 2000;
  const auto geo = coclustering(run_chain(d, h, cfg), ClusterLevel::observational);
  cfg.envelope = EnvelopeKind::dependent;
  const auto dep = coclustering(run_chain(d, h, cfg), ClusterLevel::observational);
  CHECK((geo.matrix - dep.matrix).cwiseAbs().maxCoeff() < 0.04);
}

TEST_CASE("posterior of the dominant atom covers a single generating normal") {
  const double mu_true = 2.0;
  const double s2_true = 0.64;
  int covered = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    RngStream gen(100 + rep);
    Dataset d;
    for (int j = 0; j < 2; ++j) {
      d.units.emplace_back();
      for (int i = 0; i < 60; ++i) d.units.back().push_back(draw_normal(gen, mu_true, std::sqrt(s2_true)));
    }
    SliceConfig cfg;
    cfg.iters = 1500;
    cfg.burnin = 500;
    cfg.seed = 1 + rep;
    const DrawStore store = run_chain(d, default_hyperparameters(d), cfg);
    std::vector<double> mu;
    std::vector<double> s2;
    for (const Draw& dr : store.draws) {
      std::map<int, int> counts;
      for (const auto& row : dr.M) {
        for (int m : row) ++counts[m];
      }
      const auto top = std::max_element(counts.begin(), counts.end(),
                                        [](auto a, auto b) { return a.second < b.second; });
      mu.push_back(dr.atoms[static_cast<std::size_t>(top->first)].mu);
      s2.push_back(dr.atoms[static_cast<std::size_t>(top->first)].sigma2);
    }
    auto interval = [](std::vector<double> x, double v) {
      std::sort(x.begin(), x.end());
      const auto n = x.size();
      return x[n / 40] <= v && v <= x[n - 1 - n / 40];
    };
    covered += interval(mu, mu_true) && interval(s2, s2_true) ? 1 : 0;
  }
  CHECK(covered >= 18);
}

TEST_CASE("numeric guard") {
  auto sampler = make_sampler(small_continuous(), fixed_hyper());
  sampler.state().theta[0].mu = std::nan("");
  CHECK_THROWS_AS(sampler.check_finite(), NumericError);
}
