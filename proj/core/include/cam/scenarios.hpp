// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_SCENARIOS_HPP
#define CAM_SCENARIOS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cam/model.hpp"

namespace cam {

/// Generating labels of a simulated dataset (zero-based).
struct Truth {
  std::vector<int> dc;               // per unit
  std::vector<std::vector<int>> oc;  // per observation
};

struct Scenario {
  Dataset data;
  Truth truth;
  /// Header echo: scenario id, size parameter, seed.
  std::vector<std::pair<std::string, std::string>> params;
};

enum class Scenario1Weights {
  equal,     // w_g = 1/h for every component of Y_h
  harmonic,  // w_g = (1/g) / (1 + 1/2 + ... + 1/h)
};

/// Twelve units, two from each Y_h = sum_{g<=h} w_g N(m_g, 0.6) with
/// m = (0, 5, 10, 13, 16, 20). Case 'A' gives every unit `size` observations,
/// case 'B' gives units of Y_h size * h observations.
Scenario gen_scenario1(char which_case, int size, std::uint64_t seed,
                       Scenario1Weights weights = Scenario1Weights::equal);

std::string to_string(Scenario1Weights weights);
Scenario1Weights parse_scenario1_weights(const std::string& text);

/// 4r units of 40 observations, r from each of four overlapping mixtures
/// built on N(0,.6), N(3,.6), N(-2,.6), N(2,.6) and N(10,1).
Scenario gen_scenario2(int r, std::uint64_t seed);

/// Ten count units, unit j drawn from mixture j mod 3: 50 zeros, 50 ones and
/// n3 values uniform on {0..Q} with Q in (10, 50, 100), in shuffled order.
Scenario gen_scenario3(int n3, std::uint64_t seed);

/// Ground-truth abundance class of a Scenario 3 count.
int scenario3_class(long value);

}  // namespace cam

#endif  // CAM_SCENARIOS_HPP
