#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stratostab/certify.hpp"
#include "stratostab/closed_loop.hpp"
#include "stratostab/config.hpp"

namespace stratostab {

struct RunOptions {
  std::optional<std::string> output_dir;  // overrides config / environment
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  bool quiet = false;
  bool write_outputs = true;
  int threads = 0;  // 0: hardware concurrency
};

struct SpectrumResult {
  SpectralData data;
  UnstableDecomposition dec;
  bool semisimple = false;
};

struct SynthesisResult {
  SpectralData bio;  // leading block biorthonormalized
  FeedbackLaw law;
};

struct ExperimentReport {
  Index n_modes = 0;
  double sum_re = 0.0;
  double stable_rate = 0.0;
  bool semisimple = false;
  int channels = 0;
  double sigma = 0.0;
  std::optional<double> achieved_rate;
  double gram_condition = 0.0;
  double pairing_residual = 0.0;
  std::string controller_kind;
  DecayCertificate certificate;
  double baseline_rate = 0.0;
  double mean_square_rate = 0.0;
  std::string verdict;  // "PASS" or "FAIL"
  std::vector<std::string> files;
};

OperatorModel stage_model(const ExperimentConfig& cfg);
SpectrumResult stage_spectrum(const OperatorModel& model);
SynthesisResult stage_synthesis(const ExperimentConfig& cfg, const OperatorModel& model,
                                const SpectrumResult& spectrum, int estimator_paths,
                                std::uint64_t seed, int threads);
std::vector<Trajectory> stage_simulate(const ExperimentConfig& cfg, const OperatorModel& model,
                                       const UnstableDecomposition& dec, const FeedbackLaw& law,
                                       const Vector& x0, int paths, std::uint64_t seed,
                                       int threads);

/// Deterministic generic initial state: all-ones, unit weighted norm.
Vector default_initial_state(const OperatorModel& model);

/// Full chain: spectrum -> synthesize -> simulate -> certify -> report.
/// Writes spectrum CSV/JSON, synthesis JSON, per-path trajectory CSVs, the
/// ensemble summary, the certificate JSON and a plain-text summary into the
/// output directory.
ExperimentReport run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct SweepRow {
  double value = 0.0;
  double sigma = 0.0;
  double modal_rate = 0.0;
  double modal_stderr = 0.0;
  double gram_condition = 0.0;
  double pairing_residual = 0.0;
  double gamma_hat_min = 0.0;
};

enum class SweepKind { Sigma, MaskWidth };

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepKind kind,
                                const std::vector<double>& values, const RunOptions& opts = {});

// Output helpers shared by the CLI subcommands.
void write_spectrum_csv(const std::string& path, const SpectralData& sd);
std::string spectrum_json(const SpectrumResult& spectrum);
std::string synthesis_json(const ExperimentReport& report);
std::string certificate_json(const DecayCertificate& cert);
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);
void write_ensemble_csv(const std::string& path, const std::vector<Trajectory>& ensemble);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace stratostab
