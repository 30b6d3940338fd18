#pragma once

#include <map>
#include <optional>
#include <string>

#include "stratostab/types.hpp"

namespace stratostab {

/// Experiment recipe parsed from a sectioned key = value file (TOML-style
/// sections, scalar values only). See README for the schema.
struct ExperimentConfig {
  // [model]
  std::string model_kind = "advection_diffusion";  // or "matrix"
  Index n = 200;
  double nu = 0.01;
  double f = 0.0;
  double c = -0.5;
  std::string matrix_path;  // model_kind == "matrix"

  // [mask]
  double mask_lo = 0.0;
  double mask_hi = 1.0;

  // [controller]
  std::string controller_kind = "real";  // "real" or "complex"
  double target_rate = -0.15;
  std::optional<double> sigma_override;

  // [sde]
  double dt = 0.0;  // <= 0: automatic step-size rule
  double horizon = 60.0;
  int paths = 64;
  std::uint64_t seed = 1;

  // [certify]
  double gamma = 0.0;  // <= 0: half the ensemble-minimum fitted rate
  double window = 0.5;

  // [output]
  std::string output_dir = "out";
  std::string formats = "csv,json";
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_config_file(const std::string& path);

/// Raw section/key table for round-trip checks and diagnostics.
std::map<std::string, std::map<std::string, std::string>> parse_sections(
    const std::string& text, const std::string& origin);

}  // namespace stratostab
