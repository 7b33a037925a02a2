#pragma once

#include <map>
#include <string>
#include <vector>

#include "lobmf/bertrand.hpp"
#include "lobmf/control.hpp"
#include "lobmf/dynamics.hpp"

namespace lobmf {

using Params = std::map<std::string, double>;

/// A named coefficient bundle with the defaults its experiments use.
struct Preset {
  std::string name;
  std::string summary;
  std::string kind;  // "game" or "liquidity"
  Params params;     // resolved parameter values
  GameSpec game;
  ModelCoefficients model;
  RewardSpec reward;
  double x0 = 1.0;
  double q0 = 0.0;
  EmpiricalMeasure q0_law = EmpiricalMeasure::dirac(0.0);
  std::vector<double> levels{0.0, 0.25, 0.5, 0.75};  // constant policy family
  double horizon = 1.0;                               // simulation horizon
};

struct PresetInfo {
  std::string name;
  std::string summary;
  std::string exercises;  // which checks the preset is built for
  Params defaults;
};

std::vector<PresetInfo> list_presets();

/// Builds a preset; overrides must name existing parameters
/// (ValidationError with key "params.<name>" otherwise).
Preset make_preset(const std::string& name, const Params& overrides = {});

}  // namespace lobmf
