#pragma once

#include <cstdint>
#include <string>

#include "mfgpipe/table.hpp"

namespace mfg {

struct PlantedSignalSpec {
  std::size_t rows = 200;
  std::size_t noise_predictors = 9;
  std::size_t signal_position = 6;  // 0-based slot of the signal among Var01..VarNN
  double signal_coefficient = 2.0;
  double noise_sd = 1.0;
  bool extras = false;  // add a sparse column and an unrelated tool column
  std::uint64_t seed = 20240607;
};

// y = coefficient * signal + N(0, noise_sd^2); every predictor is N(0, 1).
// Predictors are named Var01.. in column order; the response is "y".
Table make_planted_signal(const PlantedSignalSpec& spec);

std::string planted_signal_name(const PlantedSignalSpec& spec);

}  // namespace mfg
