// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/summary.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "cam/error.hpp"

namespace cam {

namespace {

void require_same_length(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw ParameterError("partitions have different lengths");
}

struct Contingency {
  std::vector<double> rows;
  std::vector<double> cols;
  std::vector<double> cells;  // non-zero cells only
  double n = 0.0;
};

Contingency contingency(const Partition& a, const Partition& b) {
  require_same_length(a, b);
  const Partition ca = canonicalize(a);
  const Partition cb = canonicalize(b);
  Contingency t;
  t.n = static_cast<double>(a.size());
  t.rows.assign(static_cast<std::size_t>(num_clusters(ca)), 0.0);
  t.cols.assign(static_cast<std::size_t>(num_clusters(cb)), 0.0);
  std::map<std::pair<int, int>, double> cells;
  for (std::size_t i = 0; i < a.size(); ++i) {
    t.rows[static_cast<std::size_t>(ca[i])] += 1.0;
    t.cols[static_cast<std::size_t>(cb[i])] += 1.0;
    cells[{ca[i], cb[i]}] += 1.0;
  }
  for (const auto& [key, c] : cells) t.cells.push_back(c);
  return t;
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

// Lexicographic comparison of candidates: lower loss, then fewer clusters,
// then smaller canonical labels.
bool better(double loss, const Partition& p, double best_loss, const Partition& best) {
  constexpr double kTieTol = 1e-12;
  if (loss < best_loss - kTieTol) return true;
  if (loss > best_loss + kTieTol) return false;
  const int kp = num_clusters(p);
  const int kb = num_clusters(best);
  if (kp != kb) return kp < kb;
  return p < best;
}

struct Merge {
  int a;
  int b;
  double height;
};

// Average linkage by the nearest-neighbour chain, merges sorted by height.
std::vector<Merge> average_linkage(const Eigen::MatrixXd& ccm) {
  const int n = static_cast<int>(ccm.rows());
  Eigen::MatrixXd d = (1.0 - ccm.array()).matrix();
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<int> chain;
  std::vector<Merge> merges;
  int remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (int i = 0; i < n; ++i) {
        if (active[static_cast<std::size_t>(i)]) {
          chain.push_back(i);
          break;
        }
      }
    }
    const int a = chain.back();
    const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
    int b = prev;
    double best = prev >= 0 ? d(a, prev) : std::numeric_limits<double>::infinity();
    for (int c = 0; c < n; ++c) {
      if (c == a || !active[static_cast<std::size_t>(c)]) continue;
      if (d(a, c) < best) {
        best = d(a, c);
        b = c;
      }
    }
    if (b == prev) {
      chain.pop_back();
      chain.pop_back();
      const int keep = std::min(a, b);
      const int drop = std::max(a, b);
      merges.push_back({keep, drop, best});
      const double sa = size[static_cast<std::size_t>(keep)];
      const double sb = size[static_cast<std::size_t>(drop)];
      for (int c = 0; c < n; ++c) {
        if (!active[static_cast<std::size_t>(c)] || c == keep || c == drop) continue;
        const double v = (sa * d(keep, c) + sb * d(drop, c)) / (sa + sb);
        d(keep, c) = v;
        d(c, keep) = v;
      }
      size[static_cast<std::size_t>(keep)] = sa + sb;
      active[static_cast<std::size_t>(drop)] = 0;
      --remaining;
    } else {
      chain.push_back(b);
    }
  }
  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& x, const Merge& y) { return x.height < y.height; });
  return merges;
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[static_cast<std::size_t>(x)] != x) {
    parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    x = parent[static_cast<std::size_t>(x)];
  }
  return x;
}

Partition labels_from_roots(std::vector<int>& parent) {
  Partition p(parent.size());
  for (std::size_t i = 0; i < parent.size(); ++i) p[i] = find_root(parent, static_cast<int>(i));
  return canonicalize(p);
}

// Replays the linkage merges tracking the bound incrementally; returns the
// cut with the smallest bound (later, coarser cuts win ties).
PartitionEstimate best_linkage_cut(const Eigen::MatrixXd& ccm) {
  const int n = static_cast<int>(ccm.rows());
  const std::vector<Merge> merges = average_linkage(ccm);
  const Eigen::VectorXd t = ccm.rowwise().sum();
  std::vector<double> s(static_cast<std::size_t>(n));
  std::vector<double> term(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
  std::vector<int> parent(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    s[ii] = ccm(i, i);
    term[ii] = -2.0 * std::log(s[ii]) + std::log(t(i));
    total += term[ii];
    members[ii] = {i};
    parent[ii] = i;
  }
  double best_total = total;
  std::size_t best_step = 0;
  for (std::size_t step = 0; step < merges.size(); ++step) {
    const int ra = find_root(parent, merges[step].a);
    const int rb = find_root(parent, merges[step].b);
    auto& A = members[static_cast<std::size_t>(ra)];
    auto& B = members[static_cast<std::size_t>(rb)];
    for (int x : A) {
      double add = 0.0;
      for (int y : B) add += ccm(x, y);
      s[static_cast<std::size_t>(x)] += add;
    }
    for (int y : B) {
      double add = 0.0;
      for (int x : A) add += ccm(y, x);
      s[static_cast<std::size_t>(y)] += add;
    }
    const double new_size = static_cast<double>(A.size() + B.size());
    A.insert(A.end(), B.begin(), B.end());
    B.clear();
    B.shrink_to_fit();
    parent[static_cast<std::size_t>(rb)] = ra;
    for (int x : A) {
      const auto xx = static_cast<std::size_t>(x);
      total -= term[xx];
      term[xx] = std::log(new_size) - 2.0 * std::log(s[xx]) + std::log(t(x));
      total += term[xx];
    }
    if (total <= best_total + 1e-12 * n) {
      best_total = std::min(best_total, total);
      best_step = step + 1;
    }
  }
  std::vector<int> replay(static_cast<std::size_t>(n));
  std::iota(replay.begin(), replay.end(), 0);
  for (std::size_t step = 0; step < best_step; ++step) {
    const int ra = find_root(replay, merges[step].a);
    const int rb = find_root(replay, merges[step].b);
    replay[static_cast<std::size_t>(rb)] = ra;
  }
  PartitionEstimate est;
  est.labels = labels_from_roots(replay);
  est.loss = expected_vi_bound(ccm, est.labels);
  est.provenance = "average-linkage";
  return est;
}

}  // namespace

std::string to_string(ClusterLevel level) {
  return level == ClusterLevel::observational ? "observational" : "distributional";
}

Partition draw_partition(const Draw& draw, ClusterLevel level) {
  if (level == ClusterLevel::distributional) return draw.S;
  Partition p;
  for (const auto& row : draw.M) p.insert(p.end(), row.begin(), row.end());
  return p;
}

CoclusteringMatrix coclustering(const DrawStore& draws, ClusterLevel level, std::size_t stride) {
  if (draws.empty()) throw ValidationError("no draws to summarise");
  if (stride == 0) throw ParameterError("stride must be positive");
  const std::size_t n = draw_partition(draws.draws.front(), level).size();
  std::vector<std::uint32_t> counts(n * n, 0);
  std::vector<int> labels;
  std::size_t used = 0;
  for (std::size_t t = 0; t < draws.draws.size(); t += stride) {
    labels = draw_partition(draws.draws[t], level);
    if (labels.size() != n) throw ValidationError("draws disagree on the number of items");
    for (std::size_t a = 0; a < n; ++a) {
      const int la = labels[a];
      std::uint32_t* row = counts.data() + a * n;
      const int* lb = labels.data();
      for (std::size_t b = a + 1; b < n; ++b) row[b] += static_cast<std::uint32_t>(lb[b] == la);
    }
    ++used;
  }
  CoclusteringMatrix out;
  out.level = level;
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double inv = 1.0 / static_cast<double>(used);
  for (std::size_t a = 0; a < n; ++a) {
    out.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = counts[a * n + b] * inv;
      out.matrix(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      out.matrix(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
    }
  }
  return out;
}

Partition canonicalize(const Partition& p) {
  std::map<int, int> relabel;
  Partition out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto [it, inserted] = relabel.try_emplace(p[i], static_cast<int>(relabel.size()));
    out[i] = it->second;
  }
  return out;
}

int num_clusters(const Partition& p) {
  return static_cast<int>(std::set<int>(p.begin(), p.end()).size());
}

double vi(const Partition& a, const Partition& b) {
  if (a.empty() && b.empty()) return 0.0;
  const Contingency t = contingency(a, b);
  double h = 0.0;
  // VI = H(a) + H(b) - 2 I(a, b) = 2 H(a, b) - H(a) - H(b)
  for (double c : t.cells) h -= 2.0 * (c / t.n) * std::log(c / t.n);
  for (double r : t.rows) h += (r / t.n) * std::log(r / t.n);
  for (double c : t.cols) h += (c / t.n) * std::log(c / t.n);
  return std::max(0.0, h);
}

double ari(const Partition& a, const Partition& b) {
  const Contingency t = contingency(a, b);
  double index = 0.0;
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (double c : t.cells) index += choose2(c);
  for (double r : t.rows) sum_rows += choose2(r);
  for (double c : t.cols) sum_cols += choose2(c);
  const double total = choose2(t.n);
  if (total == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return canonicalize(a) == canonicalize(b) ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

double nfd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ParameterError("nfd needs square matrices of the same shape");
  }
  if (a.rows() == 0) throw ParameterError("nfd of empty matrices");
  const double p = static_cast<double>(a.rows());
  return (a - b).squaredNorm() / (p * p);
}

std::vector<double> crf(std::span<const double> counts) {
  std::vector<double> sorted(counts.begin(), counts.end());
  double total = 0.0;
  for (double c : sorted) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("counts must be non-negative");
    total += c;
  }
  if (!(total > 0.0)) throw ParameterError("crf needs at least one positive count");
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<double> out(sorted.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    acc += sorted[i];
    out[i] = acc / total;
  }
  out.back() = 1.0;
  return out;
}

double expected_vi_bound(const Eigen::MatrixXd& ccm, const Partition& p) {
  const auto n = static_cast<std::size_t>(ccm.rows());
  if (p.size() != n) throw ParameterError("partition length does not match the matrix");
  const Partition c = canonicalize(p);
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(num_clusters(c)));
  for (std::size_t i = 0; i < n; ++i) groups[static_cast<std::size_t>(c[i])].push_back(static_cast<int>(i));
  double total = 0.0;
  for (const auto& g : groups) {
    const double size = static_cast<double>(g.size());
    for (int x : g) {
      double s = 0.0;
      for (int y : g) s += ccm(x, y);
      total += std::log(size) - 2.0 * std::log(s) + std::log(ccm.row(x).sum());
    }
  }
  return total / static_cast<double>(n);
}

std::vector<Partition> sampled_partitions(const DrawStore& draws, ClusterLevel level) {
  std::set<Partition> seen;
  std::vector<Partition> out;
  for (const Draw& d : draws.draws) {
    Partition p = canonicalize(draw_partition(d, level));
    if (seen.insert(p).second) out.push_back(std::move(p));
  }
  return out;
}

std::vector<Partition> average_linkage_cuts(const Eigen::MatrixXd& ccm) {
  const int n = static_cast<int>(ccm.rows());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Partition> cuts;
  cuts.push_back(labels_from_roots(parent));
  for (const Merge& m : average_linkage(ccm)) {
    const int ra = find_root(parent, m.a);
    const int rb = find_root(parent, m.b);
    parent[static_cast<std::size_t>(rb)] = ra;
    cuts.push_back(labels_from_roots(parent));
  }
  return cuts;
}

PartitionEstimate minimize_expected_vi(const Eigen::MatrixXd& ccm,
                                       const std::vector<Partition>& candidates,
                                       const ViSearchOptions& options) {
  if (ccm.rows() == 0) throw ParameterError("empty co-clustering matrix");
  PartitionEstimate best;
  bool have = false;
  std::vector<std::size_t> picks;
  if (options.max_sampled == 0 || candidates.size() <= options.max_sampled) {
    picks.resize(candidates.size());
    std::iota(picks.begin(), picks.end(), 0);
  } else {
    for (std::size_t i = 0; i < options.max_sampled; ++i) {
      picks.push_back(i * candidates.size() / options.max_sampled);
    }
  }
  for (std::size_t idx : picks) {
    Partition p = canonicalize(candidates[idx]);
    const double loss = expected_vi_bound(ccm, p);
    if (!have || better(loss, p, best.loss, best.labels)) {
      best = {std::move(p), loss, "sampled"};
      have = true;
    }
  }
  if (options.use_hierarchical || !have) {
    PartitionEstimate cut = best_linkage_cut(ccm);
    if (!have || better(cut.loss, cut.labels, best.loss, best.labels)) best = std::move(cut);
  }
  return best;
}

std::vector<double> cluster_mean_mu(const DrawStore& draws, const Partition& obs_partition) {
  if (draws.empty()) throw ValidationError("no draws to summarise");
  const int C = num_clusters(obs_partition);
  std::vector<double> sum(static_cast<std::size_t>(C), 0.0);
  std::vector<double> count(static_cast<std::size_t>(C), 0.0);
  for (const Draw& d : draws.draws) {
    std::size_t idx = 0;
    for (const auto& row : d.M) {
      for (int m : row) {
        if (idx >= obs_partition.size()) throw ValidationError("partition shorter than the draws");
        if (static_cast<std::size_t>(m) >= d.atoms.size()) throw ValidationError("draw lacks atom values");
        const auto c = static_cast<std::size_t>(obs_partition[idx]);
        sum[c] += d.atoms[static_cast<std::size_t>(m)].mu;
        count[c] += 1.0;
        ++idx;
      }
    }
  }
  for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = count[c] > 0.0 ? sum[c] / count[c] : 0.0;
  return sum;
}

std::vector<int> abundance_class_map(const std::vector<double>& cluster_mu,
                                     const std::vector<int>& bins) {
  const int total = std::accumulate(bins.begin(), bins.end(), 0);
  if (total != static_cast<int>(cluster_mu.size())) {
    throw ValidationError("class bin counts must add up to the number of clusters (" +
                          std::to_string(cluster_mu.size()) + ")");
  }
  std::vector<std::size_t> order(cluster_mu.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return cluster_mu[x] < cluster_mu[y]; });
  std::vector<int> map(cluster_mu.size());
  std::size_t pos = 0;
  for (std::size_t cls = 0; cls < bins.size(); ++cls) {
    if (bins[cls] < 0) throw ValidationError("class bin counts must be non-negative");
    for (int r = 0; r < bins[cls]; ++r) map[order[pos++]] = static_cast<int>(cls);
  }
  return map;
}

std::vector<int> abundance_classes(const Partition& obs_partition, const std::vector<int>& class_map) {
  std::vector<int> out(obs_partition.size());
  for (std::size_t i = 0; i < obs_partition.size(); ++i) {
    const int c = obs_partition[i];
    if (c < 0 || static_cast<std::size_t>(c) >= class_map.size()) {
      throw ValidationError("observational cluster " + std::to_string(c) + " has no class");
    }
    out[i] = class_map[static_cast<std::size_t>(c)];
  }
  return out;
}

Eigen::MatrixXd pcm(const std::vector<std::vector<int>>& classes, const Partition& dc, int k) {
  if (classes.size() != dc.size()) throw ParameterError("one class vector per subject is required");
  std::vector<std::size_t> subjects;
  for (std::size_t j = 0; j < dc.size(); ++j) {
    if (dc[j] == k) subjects.push_back(j);
  }
  if (subjects.empty()) throw ValidationError("distributional cluster " + std::to_string(k) + " is empty");
  const std::size_t items = classes[subjects.front()].size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(items));
  for (std::size_t j : subjects) {
    const auto& c = classes[j];
    if (c.size() != items) throw ValidationError("subjects differ in item count");
    for (std::size_t a = 0; a < items; ++a) {
      for (std::size_t b = 0; b < items; ++b) {
        if (c[a] == c[b]) m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1.0;
      }
    }
  }
  return m / static_cast<double>(subjects.size());
}

std::vector<Edge> edges_above(const Eigen::MatrixXd& m, double threshold) {
  std::vector<Edge> edges;
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < m.cols(); ++b) {
      if (m(a, b) > threshold) edges.push_back({static_cast<int>(a), static_cast<int>(b), m(a, b)});
    }
  }
  return edges;
}

}  // namespace cam
