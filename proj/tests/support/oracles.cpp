// Apache License, Version 2.0, refer to LICENSE.txt

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include <boost/math/distributions/normal.hpp>

namespace cam::testing {

double ks_pvalue(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  const double x = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

double rejection_truncated_normal(RngStream& rng, double mean, double sd, double lo, double hi) {
  if (std::isfinite(lo) && std::isfinite(hi)) {
    // Peak of the density inside [lo, hi] bounds the acceptance ratio.
    const double peak = std::clamp(mean, lo, hi);
    for (;;) {
      const double x = rng.uniform(lo, hi);
      const double log_ratio = (-(x - mean) * (x - mean) + (peak - mean) * (peak - mean)) / (2.0 * sd * sd);
      if (std::log(rng.uniform()) < log_ratio) return x;
    }
  }
  for (;;) {
    const double x = mean + sd * rng.normal();
    if (x >= lo && x < hi) return x;
  }
}

Moments2 truncated_normal_moments(double mean, double sd, double lo, double hi) {
  // Mirror left-tail intervals so the mass is a difference of small upper tails.
  if (!std::isfinite(lo) || (std::isfinite(hi) && hi - mean < mean - lo)) {
    const Moments2 m = truncated_normal_moments(-mean, sd, -hi, -lo);
    return {-m.mean, m.variance};
  }
  const boost::math::normal_distribution<> z;
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double pa = std::isfinite(a) ? boost::math::pdf(z, a) : 0.0;
  const double pb = std::isfinite(b) ? boost::math::pdf(z, b) : 0.0;
  // Upper-tail probabilities keep precision far out in the right tail.
  const double mass = (std::isfinite(a) ? boost::math::cdf(boost::math::complement(z, a)) : 1.0) -
                      (std::isfinite(b) ? boost::math::cdf(boost::math::complement(z, b)) : 0.0);
  const double apa = std::isfinite(a) ? a * pa : 0.0;
  const double bpb = std::isfinite(b) ? b * pb : 0.0;
  const double r = (pa - pb) / mass;
  return {mean + sd * r, sd * sd * (1.0 + (apa - bpb) / mass - r * r)};
}

double naive_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0.0;
  double in_a = 0.0;
  double in_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double expected = in_a * in_b / pairs;
  const double top = 0.5 * (in_a + in_b);
  if (top == expected) return 1.0;
  return (both - expected) / (top - expected);
}

double naive_vi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, std::set<std::size_t>> ca;
  std::map<int, std::set<std::size_t>> cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]].insert(i);
    cb[b[i]].insert(i);
  }
  double v = 0.0;
  for (const auto& [la, sa] : ca) {
    for (const auto& [lb, sb] : cb) {
      double r = 0.0;
      for (std::size_t i : sa) r += sb.count(i) ? 1.0 : 0.0;
      if (r == 0.0) continue;
      const double p = static_cast<double>(sa.size()) / n;
      const double q = static_cast<double>(sb.size()) / n;
      const double rr = r / n;
      v -= rr * (std::log(rr / p) + std::log(rr / q));
    }
  }
  return v;
}

double naive_nfd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  }
  return s / static_cast<double>(a.rows() * a.rows());
}

SampleStats sample_stats(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double var = ss / (n - 1.0);
  return {m, var, std::sqrt(var / n)};
}

namespace {

double nig_log_marginal(const std::vector<double>& y, const Hyperparameters& h) {
  if (y.empty()) return 0.0;
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double kn = h.k0 + n;
  const double an = h.a0 + 0.5 * n;
  const double bn = h.b0 + 0.5 * (ss + h.k0 * n / kn * (mean - h.m0) * (mean - h.m0));
  return std::lgamma(an) - std::lgamma(h.a0) + h.a0 * std::log(h.b0) - an * std::log(bn) +
         0.5 * std::log(h.k0 / kn) - 0.5 * n * std::log(2.0 * M_PI);
}

struct Grid {
  std::vector<double> value;
  std::vector<double> log_weight;
};

Grid concentration_grid(const ConcentrationPrior& p) {
  Grid g;
  if (p.is_fixed()) {
    g.value = {p.value};
    g.log_weight = {0.0};
    return g;
  }
  for (int i = 0; i <= 95; ++i) {
    const double x = -7.0 + 0.1 * i;
    g.value.push_back(std::exp(x));
    g.log_weight.push_back(p.shape * x - p.rate * std::exp(x));
  }
  return g;
}

// Running log-sum-exp.
struct LogSum {
  double m = -INFINITY;
  double s = 0.0;
  void add(double x) {
    if (x == -INFINITY) return;
    if (x > m) {
      s = s * std::exp(m - x) + 1.0;
      m = x;
    } else {
      s += std::exp(x - m);
    }
  }
  double value() const { return s > 0.0 ? m + std::log(s) : -INFINITY; }
};

// Restricted growth strings of length n.
std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int top) {
    if (i == n) {
      out.push_back(a);
      return;
    }
    for (int k = 0; k <= top + 1; ++k) {
      a[static_cast<std::size_t>(i)] = k;
      rec(i + 1, std::max(top, k));
    }
  };
  rec(1, 0);
  return out;
}

}  // namespace

EnumeratedPosterior enumerate_posterior(const std::vector<std::vector<double>>& units, const Hyperparameters& h,
                                        int max_label) {
  const int J = static_cast<int>(units.size());
  std::vector<double> y;
  std::vector<std::size_t> owner;
  for (std::size_t j = 0; j < units.size(); ++j) {
    for (double v : units[j]) {
      y.push_back(v);
      owner.push_back(j);
    }
  }
  const std::size_t N = y.size();
  const int L = max_label;
  const Grid ga = concentration_grid(h.alpha);
  const Grid gb = concentration_grid(h.beta);
  const std::size_t G = gb.value.size();

  // log E[prod_l w_l^{c_l}] under GEM(b) for one block, at every beta node.
  std::map<std::vector<int>, std::vector<double>> memo;
  auto gem_moment = [&](const std::vector<int>& c) -> const std::vector<double>& {
    auto it = memo.find(c);
    if (it != memo.end()) return it->second;
    std::vector<double> out(G, 0.0);
    for (std::size_t node = 0; node < G; ++node) {
      const double b = gb.value[node];
      int tail = 0;
      for (int v : c) tail += v;
      for (std::size_t l = 0; l < c.size() && tail > 0; ++l) {
        const int n = c[l];
        tail -= n;
        out[node] += std::lgamma(1.0 + n) + std::lgamma(b + tail) - std::lgamma(1.0 + b + n + tail) + std::log(b);
      }
    }
    return memo.emplace(c, std::move(out)).first->second;
  };

  const auto partitions = set_partitions(J);
  // Per partition and beta node: log-sums over label vectors, overall and per observation pair.
  std::vector<std::vector<LogSum>> total(partitions.size(), std::vector<LogSum>(G));
  std::vector<std::vector<LogSum>> pair(partitions.size(), std::vector<LogSum>(N * N * G));
  long configs = 1;
  for (std::size_t i = 0; i < N; ++i) configs *= L;
  std::vector<int> M(N);
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const auto& S = partitions[p];
    const int B = *std::max_element(S.begin(), S.end()) + 1;
    for (long c = 0; c < configs; ++c) {
      long r = c;
      for (std::size_t i = 0; i < N; ++i) {
        M[i] = static_cast<int>(r % L);
        r /= L;
      }
      double base = 0.0;
      for (int l = 0; l < L; ++l) {
        std::vector<double> group;
        for (std::size_t i = 0; i < N; ++i) {
          if (M[i] == l) group.push_back(y[i]);
        }
        base += nig_log_marginal(group, h);
      }
      std::vector<std::vector<int>> counts(static_cast<std::size_t>(B), std::vector<int>(static_cast<std::size_t>(L), 0));
      for (std::size_t i = 0; i < N; ++i) ++counts[static_cast<std::size_t>(S[owner[i]])][static_cast<std::size_t>(M[i])];
      std::vector<double> w(G, base);
      for (const auto& blk : counts) {
        const auto& g = gem_moment(blk);
        for (std::size_t node = 0; node < G; ++node) w[node] += g[node];
      }
      for (std::size_t node = 0; node < G; ++node) {
        total[p][node].add(w[node]);
        for (std::size_t a = 0; a < N; ++a) {
          for (std::size_t b = 0; b < N; ++b) {
            if (M[a] == M[b]) pair[p][(a * N + b) * G + node].add(w[node]);
          }
        }
      }
    }
  }

  // Combine with the CRP weights and the concentration grids.
  LogSum all;
  LogSum a_moment;
  LogSum b_moment;
  std::vector<LogSum> unit_terms(static_cast<std::size_t>(J * J));
  std::vector<LogSum> obs_terms(N * N);
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const auto& S = partitions[p];
    const int B = *std::max_element(S.begin(), S.end()) + 1;
    std::vector<int> size(static_cast<std::size_t>(B), 0);
    for (int s : S) ++size[static_cast<std::size_t>(s)];
    for (std::size_t ia = 0; ia < ga.value.size(); ++ia) {
      const double a = ga.value[ia];
      double crp = ga.log_weight[ia] + B * std::log(a) + std::lgamma(a) - std::lgamma(a + J);
      for (int n : size) crp += std::lgamma(static_cast<double>(n));
      for (std::size_t ib = 0; ib < G; ++ib) {
        const double w = crp + gb.log_weight[ib] + total[p][ib].value();
        all.add(w);
        a_moment.add(w + std::log(a));
        b_moment.add(w + std::log(gb.value[ib]));
        for (int u = 0; u < J; ++u) {
          for (int v = 0; v < J; ++v) {
            if (S[static_cast<std::size_t>(u)] == S[static_cast<std::size_t>(v)]) {
              unit_terms[static_cast<std::size_t>(u * J + v)].add(w);
            }
          }
        }
        for (std::size_t q = 0; q < N * N; ++q) obs_terms[q].add(crp + gb.log_weight[ib] + pair[p][q * G + ib].value());
      }
    }
  }
  const double Z = all.value();
  EnumeratedPosterior out;
  out.alpha_mean = std::exp(a_moment.value() - Z);
  out.beta_mean = std::exp(b_moment.value() - Z);
  out.unit_cc.resize(J, J);
  for (int u = 0; u < J; ++u) {
    for (int v = 0; v < J; ++v) out.unit_cc(u, v) = std::exp(unit_terms[static_cast<std::size_t>(u * J + v)].value() - Z);
  }
  const auto NN = static_cast<Eigen::Index>(N);
  out.obs_cc.resize(NN, NN);
  for (std::size_t q = 0; q < N * N; ++q) {
    out.obs_cc(static_cast<Eigen::Index>(q / N), static_cast<Eigen::Index>(q % N)) = std::exp(obs_terms[q].value() - Z);
  }
  return out;
}

}  // namespace cam::testing
