// Command-line runner: spectrum / synthesize / simulate / certify / run / sweep.
// Exit codes: 0 success (or certificate PASS), 1 certificate FAIL,
// 2 usage or config error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stratostab/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stratostab;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int paths = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "RNG seed (overrides config)");
  cmd->add_option("--paths", args.paths, "number of sample paths (overrides config)");
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

std::string resolve_out_dir(const CommonArgs& args, const ExperimentConfig& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("STRATOSTAB_OUT"); env && *env) return env;
  return cfg.output_dir;
}

RunOptions make_options(const CLI::App* cmd, const CommonArgs& args,
                        const ExperimentConfig& cfg) {
  RunOptions opts;
  opts.output_dir = resolve_out_dir(args, cfg);
  if (cmd->count("--seed")) opts.seed = args.seed;
  if (cmd->count("--paths")) opts.paths = args.paths;
  opts.quiet = args.quiet;
  return opts;
}

void say(const RunOptions& opts, const std::string& line) {
  if (!opts.quiet) std::cout << line << "\n";
}

int run_spectrum(const CommonArgs& args, const RunOptions& opts, const ExperimentConfig& cfg) {
  (void)args;
  const OperatorModel model = stage_model(cfg);
  const SpectrumResult spectrum = stage_spectrum(model);
  fs::create_directories(*opts.output_dir);
  const std::string csv = (fs::path(*opts.output_dir) / "spectrum.csv").string();
  write_spectrum_csv(csv, spectrum.data);
  const std::string json = (fs::path(*opts.output_dir) / "spectrum.json").string();
  write_text_file(json, spectrum_json(spectrum));
  say(opts, "wrote " + csv);
  say(opts, "wrote " + json);
  std::cout << spectrum_json(spectrum);
  return 0;
}

int run_synthesize(const CLI::App* cmd, const CommonArgs& args, const RunOptions& opts,
                   const ExperimentConfig& cfg) {
  (void)cmd;
  (void)args;
  const OperatorModel model = stage_model(cfg);
  const SpectrumResult spectrum = stage_spectrum(model);
  const int est_paths = std::min(opts.paths.value_or(cfg.paths), 32);
  const SynthesisResult synth =
      stage_synthesis(cfg, model, spectrum, est_paths, opts.seed.value_or(cfg.seed), 0);

  ExperimentReport report;
  report.n_modes = spectrum.dec.N;
  report.channels = synth.law.noise.channels;
  report.sigma = synth.law.noise.sigma;
  report.achieved_rate = synth.law.noise.achieved_rate;
  report.gram_condition = synth.law.actuator_set.condition_number;
  report.pairing_residual = synth.law.actuator_set.pairing_residual;
  report.controller_kind = cfg.controller_kind;

  fs::create_directories(*opts.output_dir);
  const std::string json = (fs::path(*opts.output_dir) / "synthesis.json").string();
  write_text_file(json, synthesis_json(report));
  say(opts, "wrote " + json);
  std::cout << synthesis_json(report);
  return 0;
}

int run_simulate(const CommonArgs& args, const RunOptions& opts, const ExperimentConfig& cfg) {
  (void)args;
  const OperatorModel model = stage_model(cfg);
  const SpectrumResult spectrum = stage_spectrum(model);
  const int paths = opts.paths.value_or(cfg.paths);
  const SynthesisResult synth = stage_synthesis(cfg, model, spectrum, std::min(paths, 32),
                                                opts.seed.value_or(cfg.seed), 0);
  const Vector x0 = default_initial_state(model);
  const auto ensemble = stage_simulate(cfg, model, spectrum.dec, synth.law, x0, paths,
                                       opts.seed.value_or(cfg.seed), 0);
  fs::create_directories(*opts.output_dir);
  for (int p = 0; p < paths; ++p) {
    char name[64];
    std::snprintf(name, sizeof(name), "trajectory_path%04d.csv", p);
    write_trajectory_csv((fs::path(*opts.output_dir) / name).string(), ensemble[p]);
  }
  const std::string ens = (fs::path(*opts.output_dir) / "ensemble.csv").string();
  write_ensemble_csv(ens, ensemble);
  say(opts, "wrote " + std::to_string(paths) + " trajectory files and " + ens);
  return 0;
}

int run_certify(const CommonArgs& args, const RunOptions& opts, const ExperimentConfig& cfg) {
  (void)args;
  // Consumes trajectory CSVs from a previous `simulate` into the same directory.
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(*opts.output_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("trajectory_path", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ConfigError("certify: no trajectory_path*.csv files in '" + *opts.output_dir +
                      "' (run `simulate` first)");
  std::vector<Trajectory> ensemble;
  ensemble.reserve(files.size());
  for (const auto& f : files) ensemble.push_back(read_trajectory_csv(f));

  std::vector<double> rates;
  for (const auto& traj : ensemble) rates.push_back(fit_decay_rate(traj, cfg.window));
  double gamma = cfg.gamma;
  if (gamma <= 0.0) {
    const double min_rate = *std::min_element(rates.begin(), rates.end());
    if (min_rate <= 0.0)
      throw NumericalError("certify: ensemble contains a growing path; no positive gamma");
    gamma = 0.5 * min_rate;
  }
  const DecayCertificate cert = certify_decay(ensemble, gamma, cfg.window);
  const std::string json = (fs::path(*opts.output_dir) / "certificate.json").string();
  write_text_file(json, certificate_json(cert));
  say(opts, "wrote " + json);
  std::cout << certificate_json(cert);
  return cert.pass ? 0 : 1;
}

int run_full(const CommonArgs& args, const RunOptions& opts, const ExperimentConfig& cfg) {
  (void)args;
  const ExperimentReport report = run_pipeline(cfg, opts);
  if (!opts.quiet)
    for (const auto& f : report.files) std::cout << "wrote " << f << "\n";
  std::cout << "N=" << report.n_modes << " M=" << report.channels
            << " sigma=" << report.sigma << " gamma_hat=" << report.certificate.gamma_hat
            << " verdict=" << report.verdict << "\n";
  return report.verdict == "PASS" ? 0 : 1;
}

int run_sweep_cmd(const CommonArgs& args, const RunOptions& opts, const ExperimentConfig& cfg,
                  const std::string& param, const std::vector<double>& values) {
  (void)args;
  SweepKind kind;
  if (param == "sigma")
    kind = SweepKind::Sigma;
  else if (param == "mask_width")
    kind = SweepKind::MaskWidth;
  else
    throw ConfigError("sweep: --param must be sigma or mask_width");
  const auto rows = run_sweep(cfg, kind, values, opts);
  fs::create_directories(*opts.output_dir);
  const std::string csv = (fs::path(*opts.output_dir) / "sweep.csv").string();
  write_sweep_csv(csv, rows);
  say(opts, "wrote " + csv);
  for (const auto& r : rows)
    std::cout << param << "=" << r.value << " sigma=" << r.sigma << " modal_rate="
              << r.modal_rate << " gamma_hat_min=" << r.gamma_hat_min << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise feedback stabilization toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string sweep_param = "sigma";
  std::vector<double> sweep_values;

  CLI::App* spectrum = app.add_subcommand("spectrum", "eigensystem and unstable index");
  CLI::App* synthesize = app.add_subcommand("synthesize", "build the noise feedback law");
  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop trajectory ensemble");
  CLI::App* certify = app.add_subcommand("certify", "decay certificate from trajectories");
  CLI::App* run = app.add_subcommand("run", "full pipeline");
  CLI::App* sweep = app.add_subcommand("sweep", "tabulate rates over sigma or mask width");
  for (CLI::App* cmd : {spectrum, synthesize, simulate, certify, run, sweep})
    add_common(cmd, args);
  sweep->add_option("--param", sweep_param, "sigma or mask_width");
  sweep->add_option("--values", sweep_values, "comma-separated sweep values")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = parse_config_file(args.config_path);
    CLI::App* active = app.get_subcommands().front();
    const RunOptions opts = make_options(active, args, cfg);
    if (active == spectrum) return run_spectrum(args, opts, cfg);
    if (active == synthesize) return run_synthesize(active, args, opts, cfg);
    if (active == simulate) return run_simulate(args, opts, cfg);
    if (active == certify) return run_certify(args, opts, cfg);
    if (active == run) return run_full(args, opts, cfg);
    if (active == sweep) return run_sweep_cmd(args, opts, cfg, sweep_param, sweep_values);
    std::cerr << "error: unknown subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
