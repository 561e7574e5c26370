#pragma once

// Run configuration: a JSON document with optional sections
//
//   model   likelihood variant and model shape
//   dgp     simulation design (required by `simulate`)
//   fit     optimizer, finite-difference and covariance options
//   mc      Monte Carlo design (required by `mc`)
//   mixing  random-instance mixing check
//
// Unknown keys are rejected; missing required keys are reported by path
// (e.g. "dgp.T"). See README for the schema.

#include "tvtp/estimate.hpp"
#include "tvtp/mc.hpp"
#include "tvtp/mixing.hpp"
#include "tvtp/simulate.hpp"

#include <string>

namespace tvtp {

struct RunConfig {
  ModelConfig model = paper_model_config(Variant::Partial);
  bool has_model = false;
  DgpSpec dgp = paper_dgp(0.0, 200, 0);
  bool has_dgp = false;
  FitOptions fit;
  MCDesign mc;
  bool has_mc = false;
  MixingCheckOptions mixing;
  bool has_mixing = false;
};

// Throws InputError with the offending key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace tvtp
