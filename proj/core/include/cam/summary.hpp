// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_SUMMARY_HPP
#define CAM_SUMMARY_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cam/draws.hpp"

namespace cam {

/// Cluster labels, one per item; any integer labels, compared up to relabelling.
using Partition = std::vector<int>;

enum class ClusterLevel { distributional, observational };

std::string to_string(ClusterLevel level);

struct CoclusteringMatrix {
  ClusterLevel level = ClusterLevel::distributional;
  Eigen::MatrixXd matrix;
};

/// Posterior pairwise co-clustering frequencies. The observational level
/// concatenates the observations of all units in unit order. `stride` uses
/// every stride-th draw.
CoclusteringMatrix coclustering(const DrawStore& draws, ClusterLevel level, std::size_t stride = 1);

/// Partition of one draw at the given level (observational: concatenated).
Partition draw_partition(const Draw& draw, ClusterLevel level);

/// Relabels by order of first appearance: 0, 1, 2, ...
Partition canonicalize(const Partition& p);
int num_clusters(const Partition& p);

/// Variation of information in nats.
double vi(const Partition& a, const Partition& b);
double ari(const Partition& a, const Partition& b);
/// Sum of squared entry differences divided by p^2.
double nfd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
/// Cumulative shares of the counts sorted in decreasing order (stable).
std::vector<double> crf(std::span<const double> counts);

/// Lower bound to the posterior expected VI of `p` obtained by moving the
/// expectation inside the logarithms, computed from the co-clustering matrix.
double expected_vi_bound(const Eigen::MatrixXd& ccm, const Partition& p);

struct PartitionEstimate {
  Partition labels;  // canonical, 0-based
  double loss = 0.0;
  std::string provenance;  // "sampled" or "average-linkage"
};

struct ViSearchOptions {
  bool use_hierarchical = true;
  /// Keep at most this many distinct sampled candidates (evenly spaced); 0 keeps all.
  std::size_t max_sampled = 0;
};

/// Distinct partitions visited by the chain, in order of first visit.
std::vector<Partition> sampled_partitions(const DrawStore& draws, ClusterLevel level);

/// Minimiser of expected_vi_bound over the sampled candidates plus every cut
/// of the average-linkage tree of 1 - ccm. Ties prefer fewer clusters, then
/// the lexicographically smaller canonical labelling.
PartitionEstimate minimize_expected_vi(const Eigen::MatrixXd& ccm,
                                       const std::vector<Partition>& candidates,
                                       const ViSearchOptions& options = {});

/// Every cut of the average-linkage tree of 1 - ccm, from singletons to a
/// single cluster, in merge order.
std::vector<Partition> average_linkage_cuts(const Eigen::MatrixXd& ccm);

/// Posterior mean of the atom mean mu over the observations of each cluster
/// of an observational partition (labels must be canonical).
std::vector<double> cluster_mean_mu(const DrawStore& draws, const Partition& obs_partition);

/// Class per observational cluster: clusters sorted by increasing posterior
/// mean mu, the first bins[0] get class 0, the next bins[1] class 1, and so on.
std::vector<int> abundance_class_map(const std::vector<double>& cluster_mu,
                                     const std::vector<int>& bins);

/// Applies a cluster -> class map; throws ValidationError for an unmapped label.
std::vector<int> abundance_classes(const Partition& obs_partition, const std::vector<int>& class_map);

/// PCM_k(l, g): share of the subjects in distributional cluster k for which
/// items l and g share an abundance class. classes[j][i] is the class of item i
/// in subject j; all subjects must have the same item count.
Eigen::MatrixXd pcm(const std::vector<std::vector<int>>& classes, const Partition& dc, int k);

struct Edge {
  int a;
  int b;
  double weight;
};

/// Edges (a < b) whose weight exceeds the threshold.
std::vector<Edge> edges_above(const Eigen::MatrixXd& m, double threshold = 0.5);

}  // namespace cam

#endif  // CAM_SUMMARY_HPP
