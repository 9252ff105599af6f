#pragma once

// Command-line experiment runner. Every subcommand is an in-process function
// returning a process exit code, so tests can drive the CLI without spawning.
//
// Artifacts, all inside the configured output directory:
//   train.dpds / test.dpds            datasets (+ .json sidecars with timestamps)
//   model-<mode>.ckpt                 checkpoints (mode: dpa, data-only, physics-only)
//   train-<mode>.csv                  per-epoch loss log (+ .json sidecar)
//   metrics.csv, snapshot_t<k>.csv    evaluate
//   uq_pdf_t<k>.csv                   uq
//   reliability.jsonl                 reliability

#include <boost/program_options.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpawno/config.hpp"
#include "dpawno/datagen.hpp"
#include "dpawno/reliability.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/training.hpp"
#include "dpawno/uq.hpp"
#include "dpawno/wno.hpp"

namespace dpawno::cli {

namespace fs = std::filesystem;
namespace po = boost::program_options;

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteState:
    case ErrorCode::DegenerateSamples:
    case ErrorCode::NotPositiveDefinite: return kNumerical;
    case ErrorCode::IoError:
    case ErrorCode::FormatVersionMismatch:
    case ErrorCode::ChecksumMismatch: return kIo;
    default: return kUsage;
  }
}

inline const std::vector<std::string>& train_modes() {
  static const std::vector<std::string> m{"dpa", "data-only", "physics-only"};
  return m;
}

struct Paths {
  fs::path dir;
  fs::path dataset(const std::string& split) const { return dir / (split + ".dpds"); }
  fs::path checkpoint(const std::string& mode) const { return dir / ("model-" + mode + ".ckpt"); }
  fs::path train_log(const std::string& mode) const { return dir / ("train-" + mode + ".csv"); }
  fs::path metrics() const { return dir / "metrics.csv"; }
  fs::path snapshot(std::size_t t) const { return dir / ("snapshot_t" + std::to_string(t) + ".csv"); }
  fs::path pdf(std::size_t t) const { return dir / ("uq_pdf_t" + std::to_string(t) + ".csv"); }
  fs::path reliability() const { return dir / "reliability.jsonl"; }
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace detail {

/// Round-trip precision, locale independent.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline Paths output_paths(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  require(fs::is_directory(dir), ErrorCode::IoError, "output directory '" + dir.string() + "' does not exist");
  return {dir};
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

inline std::uint64_t test_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.seed, Stream::test); }

inline void check_split(const SplitConfig& s, const std::string& name) {
  const auto card = s.family.cardinality();
  require(s.n > 0 && (!card || *card > 0), ErrorCode::UsageError, name + " family is empty");
}

inline Dataset make_split(const ExperimentConfig& cfg, const SplitConfig& split, std::uint64_t seed) {
  return generate(cfg.full, split.family, split.n, split.nt, seed,
                  GenerateOptions{cfg.resolved_workers(), cfg.reference_refine});
}

inline void check_dataset(const Dataset& d, const ExperimentConfig& cfg, const fs::path& path) {
  const auto& s = d.spec;
  require(s.benchmark == cfg.full.benchmark && s.nx == cfg.full.nx && s.ny == cfg.full.ny &&
              s.dt == cfg.full.dt && s.diffusivity == cfg.full.diffusivity,
          ErrorCode::InvalidArgument, "dataset '" + path.string() + "' was generated for a different problem");
}

/// Test ground truth: the stored test split if present, else generated in memory.
inline Dataset test_dataset(const ExperimentConfig& cfg, const Paths& paths, std::ostream& err) {
  check_split(cfg.test_data, "test");
  const fs::path p = paths.dataset("test");
  if (fs::exists(p)) {
    Dataset d = load_dataset(p);
    check_dataset(d, cfg, p);
    require(d.samples() > 0, ErrorCode::UsageError, "test dataset is empty");
    return d;
  }
  err << "note: " << p.string() << " not found, generating the test split in memory\n";
  return make_split(cfg, cfg.test_data, test_seed(cfg));
}

/// A named predictor; owns the model the surrogate points to.
struct Candidate {
  std::string label;
  std::unique_ptr<WnoModel> model;
  Surrogate surrogate;
};

inline Candidate load_candidate(const ExperimentConfig& cfg, const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  const auto mode = ck.meta.find("mode");
  const auto terms = ck.meta.find("terms");
  require(mode != ck.meta.end() && terms != ck.meta.end(), ErrorCode::IoError,
          "checkpoint '" + path.string() + "' lacks mode/terms metadata");
  const auto& mc = ck.model.config();
  require(mc.state_channels == cfg.full.channels() && mc.spatial_dims == cfg.full.spatial_dims(),
          ErrorCode::ShapeMismatch, "checkpoint '" + path.string() + "' does not fit benchmark " +
                                        to_string(cfg.full.benchmark));
  Candidate c{mode->second, std::make_unique<WnoModel>(std::move(ck.model)), {}};
  c.surrogate = Surrogate{cfg.full.with_terms(TermSet::parse(terms->second)), c.model.get()};
  return c;
}

inline Candidate physics_only(const ExperimentConfig& cfg) {
  return {"physics-only", nullptr, Surrogate{cfg.partial_spec(), nullptr}};
}

/// DPA-WNO, then data-only (when its checkpoint exists), then physics-only.
inline std::vector<Candidate> candidates(const ExperimentConfig& cfg, const Paths& paths,
                                         const std::string& dpa_path, const std::string& data_only_path,
                                         std::ostream& err) {
  std::vector<Candidate> out;
  out.push_back(load_candidate(cfg, dpa_path.empty() ? paths.checkpoint("dpa") : fs::path(dpa_path)));
  const fs::path d = data_only_path.empty() ? paths.checkpoint("data-only") : fs::path(data_only_path);
  if (fs::exists(d)) {
    out.push_back(load_candidate(cfg, d));
  } else if (!data_only_path.empty()) {
    fail(ErrorCode::IoError, "checkpoint '" + d.string() + "' does not exist");
  } else {
    err << "note: " << d.string() << " not found, data-only baseline skipped\n";
  }
  out.push_back(physics_only(cfg));
  return out;
}

struct Ensemble {
  Trajectories trajectories;
  std::size_t diverged = 0;
};

inline Ensemble roll_ensemble(const Surrogate& s, const Dataset& truth, std::size_t horizon, std::size_t workers) {
  Ensemble e;
  auto trajs = parallel_map<std::vector<Tensor>>(truth.samples(), workers, [&](std::size_t i) {
    try {
      return s.rollout(truth.trajectories[i][0], horizon);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NonFiniteState) throw;
      return std::vector<Tensor>{};
    }
  });
  for (const auto& t : trajs) e.diverged += t.empty();
  e.trajectories = std::move(trajs);
  return e;
}

inline Trajectories truncate(const Dataset& d, std::size_t horizon) {
  Trajectories out;
  out.reserve(d.samples());
  for (const auto& t : d.trajectories) out.emplace_back(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(horizon + 1));
  return out;
}

inline std::string csv_label(const std::string& mode) {
  std::string s = mode;
  for (char& ch : s) {
    if (ch == '-') ch = '_';
  }
  return s;
}

struct Scored {
  const ExperimentConfig* cfg = nullptr;
  Trajectories truth;
  std::vector<Candidate> models;
  std::vector<Ensemble> ensembles;
};

inline Scored score(const ExperimentConfig& cfg, const Paths& paths, const std::string& dpa_path,
                    const std::string& data_only_path, std::ostream& err) {
  check_split(cfg.test_data, "test");
  const std::size_t horizon = cfg.eval.horizon;
  require(horizon >= 1, ErrorCode::UsageError, "eval.horizon must be >= 1");
  Scored s{&cfg, {}, candidates(cfg, paths, dpa_path, data_only_path, err), {}};
  const Dataset test = test_dataset(cfg, paths, err);
  require(test.steps() >= horizon, ErrorCode::UsageError,
          "eval.horizon " + std::to_string(horizon) + " exceeds the " + std::to_string(test.steps()) +
              " stored test steps");
  s.truth = truncate(test, horizon);
  for (const auto& m : s.models) {
    s.ensembles.push_back(roll_ensemble(m.surrogate, test, horizon, cfg.resolved_workers()));
  }
  return s;
}

inline void require_step(std::size_t t, std::size_t horizon, const std::string& key) {
  require(t <= horizon, ErrorCode::UsageError,
          key + " step " + std::to_string(t) + " exceeds eval.horizon " + std::to_string(horizon));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Writes the train and/or test split with JSON sidecars.
inline int gen_data(const ExperimentConfig& cfg, const std::string& split, std::ostream& out, std::ostream& err) {
  require(split == "train" || split == "test" || split == "all", ErrorCode::UsageError,
          "--split must be train, test or all");
  const Paths paths = detail::output_paths(cfg);
  if (auto w = cfl_warning(cfg.full)) err << "warning: " << *w << '\n';
  for (const std::string name : {"train", "test"}) {
    if (split != "all" && split != name) continue;
    const SplitConfig& sc = name == "train" ? cfg.train_data : cfg.test_data;
    detail::check_split(sc, name);
    const std::uint64_t seed = name == "train" ? cfg.seed : detail::test_seed(cfg);
    const Dataset d = detail::make_split(cfg, sc, seed);
    const fs::path path = paths.dataset(name);
    save_dataset(d, path);
    nlohmann::ordered_json meta;
    meta["file"] = path.filename().string();
    meta["experiment"] = cfg.name;
    meta["split"] = name;
    meta["benchmark"] = to_string(cfg.full.benchmark);
    meta["terms"] = cfg.full.terms.str();
    meta["nx"] = cfg.full.nx;
    meta["ny"] = cfg.full.ny;
    meta["dt"] = cfg.full.dt;
    meta["dx"] = cfg.full.dx();
    meta["samples"] = d.samples();
    meta["steps"] = d.steps();
    meta["seed"] = seed;
    meta["family"] = d.family;
    meta["reference_refine"] = cfg.reference_refine;
    meta["diffusion_number"] = diffusion_number(cfg.full);
    meta["created"] = detail::utc_now();
    detail::write_json(path.string() + ".json", meta);
    out << "wrote " << path.string() << " (" << d.samples() << " samples x " << d.steps() << " steps, "
        << d.family << ")\n";
  }
  return kOk;
}

/// Trains one model and writes its checkpoint and loss log.
inline int train_model(const ExperimentConfig& cfg, const std::string& mode, const std::string& data_path,
                       std::ostream& out, std::ostream& err) {
  require(std::find(train_modes().begin(), train_modes().end(), mode) != train_modes().end(),
          ErrorCode::UsageError, "--mode must be dpa, data-only or physics-only");
  const Paths paths = detail::output_paths(cfg);
  const TermSet terms = mode == "dpa" ? cfg.partial : mode == "data-only" ? TermSet{} : cfg.partial;
  WnoModel model = WnoModel::initialize(cfg.model, derive_seed(cfg.seed, Stream::init));
  std::map<std::string, std::string> meta{{"mode", mode},
                                          {"terms", terms.str()},
                                          {"benchmark", to_string(cfg.full.benchmark)},
                                          {"experiment", cfg.name},
                                          {"seed", std::to_string(cfg.seed)}};
  const fs::path ckpt = paths.checkpoint(mode);
  nlohmann::ordered_json side;
  side["mode"] = mode;
  side["checkpoint"] = ckpt.filename().string();

  if (mode == "physics-only") {
    // The zero-initialized output layer makes the correction vanish.
    meta["epochs"] = "0";
    save_checkpoint(ckpt, model, meta);
    side["epochs"] = 0;
    side["created"] = detail::utc_now();
    detail::write_json(ckpt.string() + ".json", side);
    out << "wrote " << ckpt.string() << " (identity correction)\n";
    return kOk;
  }

  const fs::path dpath = data_path.empty() ? paths.dataset("train") : fs::path(data_path);
  require(fs::exists(dpath), ErrorCode::IoError,
          "training data '" + dpath.string() + "' does not exist; run gen-data first");
  const Dataset data = load_dataset(dpath);
  detail::check_dataset(data, cfg, dpath);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.workers = cfg.resolved_workers();
  std::ostringstream log;
  log << "epoch,T,mean_loss\n";
  const std::size_t every = std::max<std::size_t>(1, tc.epochs / 20);
  auto on_epoch = [&](const EpochRecord& r) {
    log << r.epoch << ',' << r.T << ',' << detail::num(r.mean_loss) << '\n';
    if (r.epoch % every == 0 || r.epoch + 1 == tc.epochs) {
      err << "epoch " << r.epoch << "  T " << r.T << "  loss " << r.mean_loss << '\n';
    }
  };
  auto on_checkpoint = [&](std::size_t epoch, const WnoModel& m) {
    auto mm = meta;
    mm["epochs"] = std::to_string(epoch);
    save_checkpoint(paths.dir / ("model-" + mode + "-e" + std::to_string(epoch) + ".ckpt"), m, mm);
  };
  const TrainReport rep = train(model, data, cfg.full.with_terms(terms), tc, on_checkpoint, on_epoch);
  meta["epochs"] = std::to_string(tc.epochs);
  save_checkpoint(ckpt, model, meta);
  io::write_text(paths.train_log(mode), log.str());

  side["epochs"] = tc.epochs;
  side["final_loss"] = rep.history.empty() ? 0.0 : rep.history.back().mean_loss;
  side["loss_normalization"] = rep.normalization;
  side["wall_seconds"] = rep.wall_seconds;
  side["created"] = detail::utc_now();
  detail::write_json(ckpt.string() + ".json", side);
  out << "wrote " << ckpt.string() << " and " << paths.train_log(mode).string() << '\n';
  return kOk;
}

/// Er-1 (ensemble MSE) and Er-2 (mean probe Hellinger) per model, plus snapshots.
inline int evaluate(const ExperimentConfig& cfg, const std::string& dpa_path, const std::string& data_only_path,
                    std::ostream& out, std::ostream& err) {
  const Paths paths = detail::output_paths(cfg);
  for (std::size_t t : cfg.eval.snapshot_steps) detail::require_step(t, cfg.eval.horizon, "snapshot");
  const auto s = detail::score(cfg, paths, dpa_path, data_only_path, err);
  const Probe probe = make_probe(cfg.full, cfg.eval.probe_x, cfg.eval.probe_y);

  std::ostringstream csv;
  csv << "model,er1_mse,er2_hellinger,diverged\n";
  out << "model          Er-1 (MSE)            Er-2 (Hellinger)\n";
  for (std::size_t m = 0; m < s.models.size(); ++m) {
    const auto& e = s.ensembles[m];
    double er1 = std::numeric_limits<double>::infinity(), er2 = std::numeric_limits<double>::quiet_NaN();
    if (e.diverged == 0) {
      er1 = ensemble_mse(e.trajectories, s.truth, cfg.eval.horizon);
      er2 = mean_hellinger(e.trajectories, s.truth, probe, cfg.eval.horizon, cfg.eval.pdf_points);
    }
    csv << s.models[m].label << ',' << detail::num(er1) << ',' << detail::num(er2) << ',' << e.diverged << '\n';
    out << std::left << std::setw(15) << s.models[m].label << std::setw(22) << detail::num(er1)
        << detail::num(er2);
    if (e.diverged > 0) out << "  (" << e.diverged << " diverged)";
    out << '\n';
  }
  io::write_text(paths.metrics(), csv.str());

  const PdeSpec& sp = cfg.full;
  const std::size_t shown = std::min<std::size_t>(3, s.truth.size());
  const std::size_t ny = sp.is_2d() ? sp.ny : 1;
  for (std::size_t t : cfg.eval.snapshot_steps) {
    std::ostringstream os;
    os << "sample,channel,x,y,truth";
    for (const auto& m : s.models) os << ',' << detail::csv_label(m.label);
    os << '\n';
    for (std::size_t i = 0; i < shown; ++i) {
      for (std::size_t c = 0; c < sp.channels(); ++c) {
        for (std::size_t j = 0; j < ny; ++j) {
          for (std::size_t k = 0; k < sp.nx; ++k) {
            const std::size_t at = (c * ny + j) * sp.nx + k;
            os << i << ',' << c << ',' << detail::num(sp.x_min + static_cast<double>(k) * sp.dx()) << ','
               << detail::num(sp.is_2d() ? sp.y_min + static_cast<double>(j) * sp.dy() : 0.0) << ','
               << detail::num(s.truth[i][t][at]);
            for (const auto& e : s.ensembles) {
              os << ',' << (e.trajectories[i].empty() ? std::string("nan") : detail::num(e.trajectories[i][t][at]));
            }
            os << '\n';
          }
        }
      }
    }
    io::write_text(paths.snapshot(t), os.str());
  }
  out << "wrote " << paths.metrics().string() << " and " << cfg.eval.snapshot_steps.size() << " snapshot file(s)\n";
  return kOk;
}

/// Probe PDFs of DPA-WNO, truth, physics-only and data-only on a common support.
inline int uq(const ExperimentConfig& cfg, const std::string& dpa_path, const std::string& data_only_path,
              std::ostream& out, std::ostream& err) {
  const Paths paths = detail::output_paths(cfg);
  for (std::size_t t : cfg.eval.probe_steps) detail::require_step(t, cfg.eval.horizon, "probe");
  const auto s = detail::score(cfg, paths, dpa_path, data_only_path, err);
  const Probe probe = make_probe(cfg.full, cfg.eval.probe_x, cfg.eval.probe_y);
  out << "probe x=" << probe.grid_x;
  if (cfg.full.is_2d()) out << " y=" << probe.grid_y;
  out << '\n';

  // Baselines in the order physics-only, data-only.
  std::vector<std::size_t> order{0};
  for (std::size_t m = 1; m < s.models.size(); ++m) {
    if (s.models[m].label == "physics-only") order.push_back(m);
  }
  for (std::size_t m = 1; m < s.models.size(); ++m) {
    if (s.models[m].label != "physics-only") order.push_back(m);
  }
  for (std::size_t t : cfg.eval.probe_steps) {
    std::vector<Density> dens;
    dens.push_back(estimate_pdf_or_delta(probe_values(s.truth, probe, t), cfg.eval.pdf_points));
    std::vector<std::string> names{"truth"};
    for (std::size_t m : order) {
      if (s.ensembles[m].diverged > 0) {
        err << "note: " << s.models[m].label << " diverged on " << s.ensembles[m].diverged
            << " samples, left out of the PDF table\n";
        continue;
      }
      dens.push_back(estimate_pdf_or_delta(probe_values(s.ensembles[m].trajectories, probe, t), cfg.eval.pdf_points));
      names.push_back(detail::csv_label(s.models[m].label));
    }
    std::vector<const Density*> ptrs;
    for (const auto& d : dens) ptrs.push_back(&d);
    const auto grid = common_support(ptrs, cfg.eval.pdf_points);
    std::vector<std::vector<double>> mass;
    for (const auto& d : dens) mass.push_back(rebin(d, grid));

    // Model first, then truth, then the baselines.
    std::vector<std::size_t> cols{0};
    if (names.size() > 1) cols = {1, 0};
    for (std::size_t k = 2; k < names.size(); ++k) cols.push_back(k);
    std::ostringstream os;
    os << "u";
    for (std::size_t k : cols) os << ',' << names[k];
    os << '\n';
    for (std::size_t g = 0; g < grid.size(); ++g) {
      os << detail::num(grid[g]);
      for (std::size_t k : cols) os << ',' << detail::num(mass[k][g]);
      os << '\n';
    }
    io::write_text(paths.pdf(t), os.str());
    out << "step " << t << ":";
    for (std::size_t k = 1; k < names.size(); ++k) out << "  H(" << names[k] << ")=" << detail::num(hellinger(dens[k], dens[0]));
    out << '\n';
  }
  out << "wrote " << cfg.eval.probe_steps.size() << " PDF file(s)\n";
  return kOk;
}

/// Monte Carlo reliability per surrogate; one JSON line each.
inline int reliability(const ExperimentConfig& cfg, const std::string& surrogates, const std::string& dpa_path,
                       std::ostream& out, std::ostream&) {
  const Paths paths = detail::output_paths(cfg);
  const auto& rc = cfg.reliability;
  validate(rc.grf);
  require(rc.n >= 1, ErrorCode::UsageError, "reliability.n must be >= 1");
  const auto names = dpawno::detail::split(surrogates, ',');
  require(!names.empty(), ErrorCode::UsageError, "--surrogates is empty");
  std::vector<detail::Candidate> cands;
  for (const auto& n : names) {
    if (n == "truth") {
      cands.push_back({"truth", nullptr, Surrogate{cfg.full, nullptr}});
    } else if (n == "physics-only") {
      cands.push_back(detail::physics_only(cfg));
    } else if (n == "dpa" || n == "data-only") {
      const fs::path p = n == "dpa" && !dpa_path.empty() ? fs::path(dpa_path) : paths.checkpoint(n);
      cands.push_back(detail::load_candidate(cfg, p));
      cands.back().label = n;
    } else {
      fail(ErrorCode::UsageError, "unknown surrogate '" + n + "' (truth, dpa, data-only, physics-only)");
    }
  }
  std::ostringstream lines;
  for (const auto& c : cands) {
    ReliabilityOptions opt{rc.horizon, rc.diverged_is_failure, cfg.resolved_workers()};
    const ReliabilityReport r = estimate_reliability(c.surrogate, rc.grf, rc.limit, rc.n, cfg.seed, opt);
    nlohmann::ordered_json j;
    j["surrogate"] = c.label;
    j["kernel"] = to_string(rc.grf.kernel);
    j["params"] = {{"variance", rc.grf.variance}, {"length", rc.grf.length}, {"period", rc.grf.period}};
    j["g_t"] = rc.limit.threshold;
    j["magnitude"] = rc.limit.magnitude;
    j["horizon"] = rc.horizon;
    j["n"] = r.n_samples;
    j["failures"] = r.failures;
    j["diverged"] = r.diverged;
    j["reliability"] = r.reliability;
    j["stderr"] = r.standard_error;
    j["seed"] = cfg.seed;
    lines << j.dump() << '\n';
    out << c.label << ": reliability " << detail::num(100.0 * r.reliability) << "% (" << r.failures << "/"
        << r.n_samples << " failures, " << r.diverged << " diverged)\n";
  }
  io::write_text(paths.reliability(), lines.str());
  return kOk;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct GradBlock {
  std::string name;
  std::size_t size = 0;
  double rel_error = 0.0;  // ||analytic - fd||_inf / ||fd||_inf
};

struct GradReport {
  std::string benchmark;
  std::vector<GradBlock> blocks;
  double worst() const {
    double w = 0.0;
    for (const auto& b : blocks) {
      if (std::isnan(b.rel_error)) return b.rel_error;
      w = std::max(w, b.rel_error);
    }
    return w;
  }
};

inline constexpr double kGradTolerance = 1e-5;

/// The configuration shrunk for finite differences: 16 points per axis,
/// width 4, two wavelet levels; fc1 keeps its 2x-width ratio.
inline ExperimentConfig reduced_for_gradcheck(ExperimentConfig c) {
  c.full.nx = 16;
  if (c.full.is_2d()) c.full.ny = 16;
  c.model.width = 4;
  c.model.fc1_dim = 8;
  c.model.wavelet.levels = 2;
  return c;
}

/// Autodiff vs central differences of rollout_loss over every parameter and the IC.
inline GradReport gradient_check(const ExperimentConfig& full_cfg, std::size_t T = 3, double step = 1e-4) {
  const ExperimentConfig cfg = reduced_for_gradcheck(full_cfg);
  const PdeSpec partial = cfg.partial_spec();
  WnoModel model = WnoModel::initialize(cfg.model, derive_seed(cfg.seed, Stream::init));
  // The fresh output layer is zero, which would leave every upstream gradient at zero.
  Rng rng = make_rng(cfg.seed, Stream::init, 1);
  for (const char* name : {"fc2.weight", "fc2.bias"}) {
    for (auto& v : model.param(name).vec()) v = uniform(rng, -0.3, 0.3);
  }
  IcFamily fam = cfg.train_data.family;
  const auto traj = solve(cfg.full, sample_ics(fam, 1, cfg.full, cfg.seed)[0].values, T);
  const std::vector<const std::vector<Tensor>*> batch{&traj};

  GradReport rep{to_string(cfg.full.benchmark), {}};
  const BatchGradient bg = batch_gradient(model, partial, batch, T);
  auto block = [&](const std::string& name, const Tensor& analytic, Tensor& value, auto loss_at) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double keep = value[i];
      value[i] = keep + step;
      const double up = loss_at();
      value[i] = keep - step;
      const double down = loss_at();
      value[i] = keep;
      const double fd = (up - down) / (2.0 * step);
      num = std::max(num, std::abs(analytic[i] - fd));
      den = std::max(den, std::abs(fd));
    }
    rep.blocks.push_back({name, value.size(), den > 0.0 ? num / den : num});
  };
  for (std::size_t k = 0; k < model.params().size(); ++k) {
    block(model.params()[k].name, bg.grads[k], model.params()[k].value,
          [&] { return rollout_loss(model, partial, batch, T); });
  }

  // Initial condition: gradient through the same loss with the IC as a leaf.
  const double weight = 1.0 / (static_cast<double>(T) * static_cast<double>(shape_size(partial.field_shape())));
  auto ic_loss = [&](const Tensor& ic, Tensor* grad) {
    Tape tape;
    if (!grad) tape.set_grad_enabled(false);
    const auto p = bind(tape, model);
    const CorrectionFn corr = wno_correction(model, p, grid_coordinates(partial));
    std::vector<Var> states{tape.leaf(ic)};
    for (std::size_t t = 0; t < T; ++t) states.push_back(euler_step(states.back(), partial, corr(states.back())));
    Var loss = trajectory_sse(states, traj, T, weight);
    if (grad) *grad = backward(tape, loss).get(states[0]);
    return loss.value().item();
  };
  Tensor ic = traj[0], ic_grad;
  ic_loss(ic, &ic_grad);
  block("initial_condition", ic_grad, ic, [&] { return ic_loss(ic, nullptr); });
  return rep;
}

inline int gradcheck(const ExperimentConfig& cfg, std::ostream& out) {
  const GradReport r = gradient_check(cfg);
  for (const auto& b : r.blocks) {
    out << std::left << std::setw(28) << b.name << std::setw(8) << b.size << detail::num(b.rel_error) << '\n';
  }
  const bool ok = r.worst() < kGradTolerance;
  out << (ok ? "PASS" : "FAIL") << " " << r.benchmark << " max relative error " << detail::num(r.worst())
      << " (tolerance " << kGradTolerance << ")\n";
  return ok ? kOk : kNumerical;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

inline const char* kUsageText =
    "usage: dpawno <command> <config-or-preset> [options]\n"
    "\n"
    "commands:\n"
    "  gen-data     generate train/test ground truth with the full physics\n"
    "  train        train a model (--mode dpa | data-only | physics-only)\n"
    "  evaluate     Er-1/Er-2 table and trajectory snapshots on the test split\n"
    "  uq           probe PDFs of model, truth, physics-only and data-only\n"
    "  reliability  Monte Carlo reliability over GRF initial conditions\n"
    "  gradcheck    autodiff vs finite differences at reduced size\n"
    "\n"
    "Run 'dpawno <command> --help' for options and the config keys.\n";

inline std::string help_text(const std::string& command, const po::options_description& opts) {
  std::ostringstream os;
  os << "usage: dpawno " << command << " <config-or-preset> [options]\n\n" << opts << '\n';
  os << "Config files are INI: [section] headers with key = value lines; '#' and ';' start comments.\n";
  os << "Any key can be overridden with --set section.key=value.\n";
  os << "\nshipped presets:";
  for (const auto& p : preset_names()) os << ' ' << p;
  os << "\n\nconfig keys:\n" << config_help();
  return os.str();
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    (args.empty() ? err : out) << kUsageText;
    return args.empty() ? kUsage : kOk;
  }
  const std::string command = args[0];
  static const std::vector<std::string> commands{"gen-data", "train", "evaluate", "uq", "reliability", "gradcheck"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
    err << "error: unknown command '" << command << "'\n" << kUsageText;
    return kUsage;
  }

  std::string config, split, mode, data, checkpoint, data_only_checkpoint, surrogates;
  std::vector<std::string> overrides;
  std::size_t workers = 0;
  po::options_description opts("options");
  opts.add_options()("help,h", "show this help")(
      "config", po::value(&config), "config file path or preset name (also the first positional argument)")(
      "set", po::value(&overrides)->composing(), "override a config key: section.key=value (repeatable)")(
      "workers", po::value(&workers), "threads; default all cores (same results for any value)");
  if (command == "gen-data") {
    opts.add_options()("split", po::value(&split)->default_value("all"), "train | test | all");
  } else if (command == "train") {
    opts.add_options()("mode", po::value(&mode)->default_value("dpa"), "dpa | data-only | physics-only")(
        "data", po::value(&data), "training dataset (default <output_dir>/train.dpds)");
  } else if (command == "evaluate" || command == "uq") {
    opts.add_options()("checkpoint", po::value(&checkpoint), "DPA-WNO checkpoint (default <output_dir>/model-dpa.ckpt)")(
        "data-only-checkpoint", po::value(&data_only_checkpoint),
        "data-only checkpoint (default <output_dir>/model-data-only.ckpt, skipped when absent)");
  } else if (command == "reliability") {
    opts.add_options()("surrogates", po::value(&surrogates)->default_value("truth,dpa"),
                       "comma list of truth | dpa | data-only | physics-only")(
        "checkpoint", po::value(&checkpoint), "DPA-WNO checkpoint (default <output_dir>/model-dpa.ckpt)");
  }
  po::positional_options_description pos;
  pos.add("config", 1);

  po::variables_map vm;
  try {
    std::vector<std::string> rest(args.begin() + 1, args.end());
    po::store(po::command_line_parser(rest).options(opts).positional(pos).run(), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    err << "error: " << e.what() << "\n\n" << help_text(command, opts);
    return kUsage;
  }
  if (vm.count("help")) {
    out << help_text(command, opts);
    return kOk;
  }
  if (config.empty()) {
    err << "error: no config given\n\n" << help_text(command, opts);
    return kUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config, overrides);
    if (vm.count("workers")) cfg.workers = workers;
    if (command == "gen-data") return gen_data(cfg, split, out, err);
    if (command == "train") return train_model(cfg, mode, data, out, err);
    if (command == "evaluate") return evaluate(cfg, checkpoint, data_only_checkpoint, out, err);
    if (command == "uq") return uq(cfg, checkpoint, data_only_checkpoint, out, err);
    if (command == "reliability") return reliability(cfg, surrogates, checkpoint, out, err);
    return gradcheck(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kNumerical;
  }
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace dpawno::cli
