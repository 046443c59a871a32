// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_DRAWS_HPP
#define CAM_DRAWS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cam/model.hpp"

namespace cam {

/// Projection of a sampler state kept for posterior summaries.
struct Draw {
  long sweep = 0;
  std::vector<int> S;                 // zero-based outer labels per unit
  std::vector<std::vector<int>> M;    // zero-based inner labels per observation
  std::vector<double> pi;             // outer weights, k < K_active
  /// Inner weights of each occupied outer cluster, l < L_active.
  std::vector<std::pair<int, std::vector<double>>> omega;
  std::vector<Atom> atoms;            // l < L_active
  double alpha = 0.0;
  double beta = 0.0;
  double reg_coeff = 0.0;
  int K_active = 0;
  int L_active = 0;
};

struct RunMeta {
  std::string sampler;
  std::string model;
  std::uint64_t seed = 0;
  int chain = 0;
  /// Ordered key/value echo of the full configuration.
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> warnings;
  std::map<std::string, double> diagnostics;
};

struct DrawStore {
  RunMeta meta;
  std::vector<int> unit_sizes;
  std::vector<Draw> draws;

  std::size_t size() const { return draws.size(); }
  bool empty() const { return draws.empty(); }
};

/// Captures the thin-th projection of a state.
Draw project_state(const SamplerState& state, long sweep);

/// Writes S.csv, M_unit<j>.csv, atoms.csv, weights.csv, scalars.csv and
/// meta.json into `dir` (created if needed).
void write_drawstore(const DrawStore& store, const std::filesystem::path& dir);

/// Reads a chain directory written by write_drawstore. Weights are not
/// reloaded; every summary works from labels, atoms and scalars.
DrawStore read_drawstore(const std::filesystem::path& dir);

/// Concatenates the draws of several chains over the same dataset.
DrawStore pool_chains(const std::vector<DrawStore>& chains);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace cam

#endif  // CAM_DRAWS_HPP
