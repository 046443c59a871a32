// Apache License, Version 2.0, refer to LICENSE.txt

#include "cam/scenarios.hpp"

#include <array>
#include <cmath>
#include <numeric>

#include "cam/error.hpp"
#include "cam/random.hpp"

namespace cam {

namespace {

struct Component {
  double weight;
  double mean;
  double variance;
  int oc;
};

// One unit of n draws from a finite normal mixture.
void draw_mixture_unit(RngStream& rng, const std::vector<Component>& mix, int n,
                       std::vector<double>& values, std::vector<int>& labels) {
  std::vector<double> logw;
  for (const auto& c : mix) logw.push_back(std::log(c.weight));
  values.resize(static_cast<std::size_t>(n));
  labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& c = mix[draw_categorical_log(rng, logw)];
    values[static_cast<std::size_t>(i)] = draw_normal(rng, c.mean, std::sqrt(c.variance));
    labels[static_cast<std::size_t>(i)] = c.oc;
  }
}

void add_unit(Scenario& s, int dc, std::vector<double> values, std::vector<int> labels) {
  s.data.unit_names.push_back("unit_" + std::to_string(s.data.units.size() + 1));
  s.data.units.push_back(std::move(values));
  s.truth.dc.push_back(dc);
  s.truth.oc.push_back(std::move(labels));
}

}  // namespace

std::string to_string(Scenario1Weights weights) {
  return weights == Scenario1Weights::harmonic ? "harmonic" : "equal";
}

Scenario1Weights parse_scenario1_weights(const std::string& text) {
  if (text == "equal") return Scenario1Weights::equal;
  if (text == "harmonic") return Scenario1Weights::harmonic;
  throw ValidationError("unknown scenario 1 weights '" + text + "'");
}

Scenario gen_scenario1(char which_case, int size, std::uint64_t seed, Scenario1Weights weights) {
  if (which_case != 'A' && which_case != 'B') throw ValidationError("scenario 1 case must be A or B");
  if (size < 1) throw ValidationError("scenario 1 size must be positive");
  constexpr std::array<double, 6> means = {0.0, 5.0, 10.0, 13.0, 16.0, 20.0};
  Scenario s;
  s.data.kind = DataKind::continuous;
  s.params = {{"scenario", "1"}, {"case", std::string(1, which_case)}, {"size", std::to_string(size)},
            {"weights", to_string(weights)}, {"seed", std::to_string(seed)}};
  const RngStream root(seed);
  std::uint64_t stream = 0;
  for (int h = 1; h <= 6; ++h) {
    double harmonic = 0.0;
    for (int g = 1; g <= h; ++g) harmonic += 1.0 / g;
    std::vector<Component> mix;
    for (int g = 1; g <= h; ++g) {
      const double w = weights == Scenario1Weights::equal ? 1.0 / h : (1.0 / g) / harmonic;
      mix.push_back({w, means[static_cast<std::size_t>(g - 1)], 0.6, g - 1});
    }
    const int n = which_case == 'A' ? size : size * h;
    for (int copy = 0; copy < 2; ++copy) {
      RngStream rng = root.split(stream++);
      std::vector<double> values;
      std::vector<int> labels;
      draw_mixture_unit(rng, mix, n, values, labels);
      add_unit(s, h - 1, std::move(values), std::move(labels));
    }
  }
  return s;
}

Scenario gen_scenario2(int r, std::uint64_t seed) {
  if (r < 1) throw ValidationError("scenario 2 needs r >= 1");
  // Distinct components: 0 -> N(0,.6), 1 -> N(3,.6), 2 -> N(-2,.6), 3 -> N(2,.6), 4 -> N(10,1).
  const std::vector<std::vector<Component>> mixtures = {
      {{0.75, 0.0, 0.6, 0}, {0.25, 3.0, 0.6, 1}},
      {{0.25, 0.0, 0.6, 0}, {0.75, 3.0, 0.6, 1}},
      {{0.33, 0.0, 0.6, 0}, {0.34, -2.0, 0.6, 2}, {0.33, 2.0, 0.6, 3}},
      {{0.25, 0.0, 0.6, 0}, {0.25, -2.0, 0.6, 2}, {0.25, 2.0, 0.6, 3}, {0.25, 10.0, 1.0, 4}},
  };
  Scenario s;
  s.data.kind = DataKind::continuous;
  s.params = {{"scenario", "2"}, {"r", std::to_string(r)}, {"seed", std::to_string(seed)}};
  const RngStream root(seed);
  std::uint64_t stream = 0;
  for (std::size_t h = 0; h < mixtures.size(); ++h) {
    for (int copy = 0; copy < r; ++copy) {
      RngStream rng = root.split(stream++);
      std::vector<double> values;
      std::vector<int> labels;
      draw_mixture_unit(rng, mixtures[h], 40, values, labels);
      add_unit(s, static_cast<int>(h), std::move(values), std::move(labels));
    }
  }
  return s;
}

int scenario3_class(long value) {
  if (value < 0) throw ParameterError("counts are non-negative");
  if (value <= 1) return 0;
  if (value <= 10) return 1;
  if (value <= 50) return 2;
  return 3;
}

Scenario gen_scenario3(int n3, std::uint64_t seed) {
  if (n3 < 1) throw ValidationError("scenario 3 needs n3 >= 1");
  constexpr std::array<long, 3> Q = {10, 50, 100};
  constexpr int J = 10;
  Scenario s;
  s.data.kind = DataKind::count;
  s.params = {{"scenario", "3"}, {"n3", std::to_string(n3)}, {"seed", std::to_string(seed)}};
  const RngStream root(seed);
  for (int j = 0; j < J; ++j) {
    RngStream rng = root.split(static_cast<std::uint64_t>(j));
    const int g = j % 3;
    std::vector<double> values(50, 0.0);
    values.insert(values.end(), 50, 1.0);
    const auto width = static_cast<std::size_t>(Q[static_cast<std::size_t>(g)] + 1);
    for (int i = 0; i < n3; ++i) values.push_back(static_cast<double>(rng.uniform_index(width)));
    // Fisher-Yates
    for (std::size_t i = values.size() - 1; i > 0; --i) {
      std::swap(values[i], values[rng.uniform_index(i + 1)]);
    }
    std::vector<int> labels(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) labels[i] = scenario3_class(static_cast<long>(values[i]));
    add_unit(s, g, std::move(values), std::move(labels));
  }
  return s;
}

}  // namespace cam
