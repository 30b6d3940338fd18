#include "stratostab/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "stratostab/matrix_io.hpp"

namespace stratostab {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  if (!std::isfinite(v)) v = std::copysign(std::numeric_limits<double>::max(), v);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  if (!std::isfinite(v)) v = std::copysign(std::numeric_limits<double>::max(), v);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Stage wrapper: prefix errors with the failing stage, keep the error class.
template <typename Fn>
auto with_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + name + "': " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage '" + name + "': " + e.what());
  }
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size();
  std::size_t r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(k)));
  r = std::min(std::max<std::size_t>(r, 1), k);
  return values[r - 1];
}

template <typename Fn>
void parallel_paths(int paths, int threads, Fn&& body) {
  threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, paths));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    try {
      for (;;) {
        const int p = next.fetch_add(1);
        if (p >= paths) break;
        body(p);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

Vector default_initial_state(const OperatorModel& model) {
  Vector x0 = Vector::Ones(model.dim);
  return x0 / model.norm(x0);
}

OperatorModel stage_model(const ExperimentConfig& cfg) {
  return with_stage("model", [&]() {
    OperatorModel model;
    if (cfg.model_kind == "advection_diffusion") {
      AdvectionDiffusionSpec spec;
      spec.n = cfg.n;
      spec.nu = cfg.nu;
      spec.f = cfg.f;
      spec.c = cfg.c;
      model = build_advection_diffusion(spec);
    } else {
      const Matrix a = read_matrix_file(cfg.matrix_path);
      model = build_from_matrix(a, RealVector::Ones(a.rows()), RealVector::Ones(a.rows()),
                                "matrix:" + cfg.matrix_path);
    }
    if (cfg.mask_lo != 0.0 || cfg.mask_hi != 1.0)
      model = subdomain_mask(model, cfg.mask_lo, cfg.mask_hi);
    return model;
  });
}

SpectrumResult stage_spectrum(const OperatorModel& model) {
  return with_stage("spectrum", [&]() {
    SpectrumResult out;
    out.data = eigendecompose(model);
    out.dec = select_unstable_index(out.data);
    out.semisimple = check_semisimple(out.data, out.dec.N).semisimple;
    return out;
  });
}

SynthesisResult stage_synthesis(const ExperimentConfig& cfg, const OperatorModel& model,
                                const SpectrumResult& spectrum, int estimator_paths,
                                std::uint64_t seed, int threads) {
  return with_stage("synthesize", [&]() {
    const Index n_modes = spectrum.dec.N;
    if (n_modes == 0)
      throw ConfigError("system has no unstable block (N = 0); nothing to synthesize");
    SynthesisResult out;
    out.bio = biorthonormalize(spectrum.data, n_modes);

    TuneParams tune;
    tune.estimator.paths = std::max(8, estimator_paths);
    tune.estimator.horizon = 40.0;
    tune.estimator.seed = seed;
    tune.estimator.threads = threads;

    if (cfg.controller_kind == "complex") {
      const ActuatorSet act = build_actuators(out.bio, n_modes, model);
      NoiseDesign design;
      if (cfg.sigma_override) {
        design = synthesize_noise_matrices(out.bio.eigenvalues.head(n_modes),
                                           *cfg.sigma_override);
      } else {
        design = tune_noise_intensity(Matrix(out.bio.eigenvalues.head(n_modes).asDiagonal()),
                                      cfg.target_rate, tune);
      }
      out.law = build_feedback(design, out.bio, act, model);
    } else {
      const RealBasis basis = build_real_basis(out.bio, n_modes);
      RealFeedbackOptions options;
      if (cfg.sigma_override)
        options.sigma = *cfg.sigma_override;
      else
        options.target_rate = cfg.target_rate;
      options.tune = tune;
      out.law = build_real_feedback(basis, out.bio, model, options);
    }
    return out;
  });
}

std::vector<Trajectory> stage_simulate(const ExperimentConfig& cfg, const OperatorModel& model,
                                       const UnstableDecomposition& dec, const FeedbackLaw& law,
                                       const Vector& x0, int paths, std::uint64_t seed,
                                       int threads) {
  return with_stage("simulate", [&]() {
    std::vector<Trajectory> ensemble(paths);
    parallel_paths(paths, threads, [&](int p) {
      ClosedLoopParams params;
      params.dt = cfg.dt;
      params.horizon = cfg.horizon;
      params.seed = seed;
      params.path = static_cast<std::uint32_t>(p);
      ClosedLoopRun run = simulate_closed_loop(model, dec, law, x0, params);
      ensemble[p] = std::move(run.full);
    });
    return ensemble;
  });
}

ExperimentReport run_pipeline(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentReport report;
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const int paths = opts.paths.value_or(cfg.paths);

  std::string out_dir = cfg.output_dir;
  if (opts.output_dir) out_dir = *opts.output_dir;
  if (opts.write_outputs) fs::create_directories(out_dir);
  auto emit = [&](const std::string& name, const std::string& content) {
    if (!opts.write_outputs) return;
    const std::string path = (fs::path(out_dir) / name).string();
    write_text_file(path, content);
    report.files.push_back(path);
  };

  const OperatorModel model = stage_model(cfg);
  const SpectrumResult spectrum = stage_spectrum(model);
  report.n_modes = spectrum.dec.N;
  report.sum_re = spectrum.dec.sum_re;
  report.stable_rate = spectrum.dec.stable_rate;
  report.semisimple = spectrum.semisimple;
  if (opts.write_outputs) {
    const std::string path = (fs::path(out_dir) / "spectrum.csv").string();
    write_spectrum_csv(path, spectrum.data);
    report.files.push_back(path);
  }
  emit("spectrum.json", spectrum_json(spectrum));

  const SynthesisResult synth =
      stage_synthesis(cfg, model, spectrum, std::min(paths, 32), seed, opts.threads);
  report.channels = synth.law.noise.channels;
  report.sigma = synth.law.noise.sigma;
  report.achieved_rate = synth.law.noise.achieved_rate;
  report.gram_condition = synth.law.actuator_set.condition_number;
  report.pairing_residual = synth.law.actuator_set.pairing_residual;
  report.controller_kind = cfg.controller_kind;
  emit("synthesis.json", synthesis_json(report));

  const Vector x0 = default_initial_state(model);
  const std::vector<Trajectory> ensemble =
      stage_simulate(cfg, model, spectrum.dec, synth.law, x0, paths, seed, opts.threads);
  if (opts.write_outputs) {
    for (int p = 0; p < paths; ++p) {
      char name[64];
      std::snprintf(name, sizeof(name), "trajectory_path%04d.csv", p);
      const std::string path = (fs::path(out_dir) / name).string();
      write_trajectory_csv(path, ensemble[p]);
      report.files.push_back(path);
    }
    const std::string path = (fs::path(out_dir) / "ensemble.csv").string();
    write_ensemble_csv(path, ensemble);
    report.files.push_back(path);
  }

  with_stage("certify", [&]() {
    std::vector<double> rates;
    rates.reserve(ensemble.size());
    for (const auto& traj : ensemble) rates.push_back(fit_decay_rate(traj, cfg.window));
    const double min_rate = *std::min_element(rates.begin(), rates.end());
    double gamma = cfg.gamma;
    if (gamma <= 0.0) {
      if (min_rate <= 0.0)
        throw NumericalError("ensemble contains a growing path (minimum fitted rate " +
                             fmt_short(min_rate) + "); no positive gamma to certify");
      gamma = 0.5 * min_rate;
    }
    report.certificate = certify_decay(ensemble, gamma, cfg.window);
    report.mean_square_rate = mean_square_decay(ensemble, cfg.window).rate;
    return 0;
  });
  report.baseline_rate =
      with_stage("certify", [&]() { return baseline_growth(model, x0, cfg.horizon); });
  report.verdict = report.certificate.pass ? "PASS" : "FAIL";
  emit("certificate.json", certificate_json(report.certificate));

  std::ostringstream summary;
  summary << "model: " << model.label << "\n"
          << "controller: " << report.controller_kind << "\n"
          << "N = " << report.n_modes << ", M = " << report.channels
          << ", sum Re lambda = " << fmt_short(report.sum_re)
          << ", stable rate = " << fmt_short(report.stable_rate) << "\n"
          << "semisimple: " << (report.semisimple ? "yes" : "no") << "\n"
          << "sigma = " << fmt_short(report.sigma);
  if (report.achieved_rate)
    summary << " (modal rate " << fmt_short(*report.achieved_rate) << ")";
  summary << "\n"
          << "gram condition = " << fmt_short(report.gram_condition)
          << ", pairing residual = " << fmt_short(report.pairing_residual) << "\n"
          << "paths = " << report.certificate.paths << ", gamma = "
          << fmt_short(report.certificate.gamma) << ", gamma_hat = "
          << fmt_short(report.certificate.gamma_hat) << ", C_hat = "
          << fmt_short(report.certificate.c_hat) << "\n"
          << "fraction satisfying envelope = " << fmt_short(report.certificate.fraction_satisfying)
          << "\n"
          << "mean-square stable-part rate = " << fmt_short(report.mean_square_rate) << "\n"
          << "uncontrolled baseline rate = " << fmt_short(report.baseline_rate) << "\n"
          << "verdict: " << report.verdict << "\n";
  emit("summary.txt", summary.str());
  return report;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, SweepKind kind,
                                const std::vector<double>& values, const RunOptions& opts) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepRow> rows;
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const int sweep_paths = std::min(opts.paths.value_or(8), cfg.paths);

  for (const double value : values) {
    ExperimentConfig c = cfg;
    if (kind == SweepKind::Sigma) {
      if (value < 0.0) throw ConfigError("sweep: sigma values must be >= 0");
      c.sigma_override = value;
    } else {
      const double center = 0.5 * (cfg.mask_lo + cfg.mask_hi);
      c.mask_lo = std::max(0.0, center - 0.5 * value);
      c.mask_hi = std::min(1.0, center + 0.5 * value);
      if (!(c.mask_lo < c.mask_hi)) throw ConfigError("sweep: degenerate mask width");
    }
    const OperatorModel model = stage_model(c);
    const SpectrumResult spectrum = stage_spectrum(model);
    const SynthesisResult synth = stage_synthesis(c, model, spectrum, 16, seed, opts.threads);

    SweepRow row;
    row.value = value;
    row.sigma = synth.law.noise.sigma;
    row.gram_condition = synth.law.actuator_set.condition_number;
    row.pairing_residual = synth.law.actuator_set.pairing_residual;

    LyapunovParams lp;
    lp.paths = 16;
    lp.horizon = 40.0;
    lp.seed = seed;
    lp.threads = opts.threads;
    const LyapunovEstimate est = estimate_lyapunov(synth.law.modal_system(), lp);
    row.modal_rate = est.value;
    row.modal_stderr = est.stderror;

    const Vector x0 = default_initial_state(model);
    const auto ensemble =
        stage_simulate(c, model, spectrum.dec, synth.law, x0, sweep_paths, seed, opts.threads);
    double min_rate = std::numeric_limits<double>::infinity();
    for (const auto& traj : ensemble)
      min_rate = std::min(min_rate, fit_decay_rate(traj, c.window));
    row.gamma_hat_min = min_rate;
    rows.push_back(row);
  }
  return rows;
}

void write_spectrum_csv(const std::string& path, const SpectralData& sd) {
  std::ostringstream out;
  out << "index,re_lambda,im_lambda,residual\n";
  for (Index j = 0; j < sd.dim(); ++j)
    out << (j + 1) << ',' << fmt(sd.eigenvalues(j).real()) << ','
        << fmt(sd.eigenvalues(j).imag()) << ',' << fmt(sd.right_residuals(j)) << '\n';
  write_text_file(path, out.str());
}

std::string spectrum_json(const SpectrumResult& spectrum) {
  std::ostringstream out;
  out << "{\"N\": " << spectrum.dec.N << ", \"sum_re\": " << fmt(spectrum.dec.sum_re)
      << ", \"stable_rate\": " << fmt(spectrum.dec.stable_rate)
      << ", \"semisimple\": " << (spectrum.semisimple ? "true" : "false") << "}\n";
  return out.str();
}

std::string synthesis_json(const ExperimentReport& report) {
  std::ostringstream out;
  out << "{\"N\": " << report.n_modes << ", \"M\": " << report.channels
      << ", \"sigma\": " << fmt(report.sigma) << ", \"achieved_rate\": ";
  if (report.achieved_rate)
    out << fmt(*report.achieved_rate);
  else
    out << "null";
  out << ", \"gram_condition\": " << fmt(report.gram_condition)
      << ", \"eq18_residual\": " << fmt(report.pairing_residual) << ", \"kind\": \""
      << report.controller_kind << "\"}\n";
  return out.str();
}

std::string certificate_json(const DecayCertificate& cert) {
  std::ostringstream out;
  out << "{\"gamma\": " << fmt(cert.gamma) << ", \"gamma_hat\": " << fmt(cert.gamma_hat)
      << ", \"C_hat\": " << fmt(cert.c_hat) << ", \"paths\": " << cert.paths
      << ", \"fraction_satisfying\": " << fmt(cert.fraction_satisfying) << ", \"verdict\": \""
      << (cert.pass ? "PASS" : "FAIL") << "\"}\n";
  return out.str();
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ostringstream out;
  out << "t,norm_X,norm_Xu,norm_Xs\n";
  const bool split = traj.norm_xu.size() == traj.times.size();
  for (Index i = 0; i < traj.times.size(); ++i) {
    out << fmt(traj.times(i)) << ',' << fmt(traj.norm_x(i)) << ','
        << (split ? fmt(traj.norm_xu(i)) : std::string("nan")) << ','
        << (split ? fmt(traj.norm_xs(i)) : std::string("nan")) << '\n';
  }
  write_text_file(path, out.str());
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,norm_X", 0) != 0)
    throw ConfigError(path + ": missing trajectory CSV header");
  std::vector<std::array<double, 4>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 4> row{};
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(ls, cell, ','))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 4 columns");
      row[c] = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  if (rows.size() < 2) throw ConfigError(path + ": too few samples");
  Trajectory traj;
  traj.times.resize(rows.size());
  traj.norm_x.resize(rows.size());
  traj.norm_xu.resize(rows.size());
  traj.norm_xs.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    traj.times(static_cast<Index>(i)) = rows[i][0];
    traj.norm_x(static_cast<Index>(i)) = rows[i][1];
    traj.norm_xu(static_cast<Index>(i)) = rows[i][2];
    traj.norm_xs(static_cast<Index>(i)) = rows[i][3];
  }
  if (std::isnan(rows[0][2])) {
    traj.norm_xu.resize(0);
    traj.norm_xs.resize(0);
  }
  return traj;
}

void write_ensemble_csv(const std::string& path, const std::vector<Trajectory>& ensemble) {
  if (ensemble.empty()) throw ConfigError("write_ensemble_csv: empty ensemble");
  const auto& times = ensemble.front().times;
  std::ostringstream out;
  out << "t,mean_log_norm,q10,q90\n";
  std::vector<double> logs(ensemble.size());
  for (Index i = 0; i < times.size(); ++i) {
    double mean = 0.0;
    for (std::size_t p = 0; p < ensemble.size(); ++p) {
      const double n = std::max(ensemble[p].norm_x(i), 1e-300);
      logs[p] = std::log(n);
      mean += logs[p];
    }
    mean /= static_cast<double>(ensemble.size());
    out << fmt(times(i)) << ',' << fmt(mean) << ','
        << fmt(nearest_rank_quantile(logs, 0.10)) << ','
        << fmt(nearest_rank_quantile(logs, 0.90)) << '\n';
  }
  write_text_file(path, out.str());
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "value,sigma,modal_rate,modal_stderr,gram_condition,eq18_residual,gamma_hat_min\n";
  for (const auto& r : rows)
    out << fmt(r.value) << ',' << fmt(r.sigma) << ',' << fmt(r.modal_rate) << ','
        << fmt(r.modal_stderr) << ',' << fmt(r.gram_condition) << ','
        << fmt(r.pairing_residual) << ',' << fmt(r.gamma_hat_min) << '\n';
  write_text_file(path, out.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw ConfigError("failed while writing '" + path + "'");
}

}  // namespace stratostab
