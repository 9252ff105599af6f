#pragma once

// Experiment configuration: INI files with [section] headers and key = value
// lines. Every accepted key is listed in config_keys(), which also drives
// validation (unknown keys are rejected) and the CLI help text.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpawno/datagen.hpp"
#include "dpawno/error.hpp"
#include "dpawno/grf.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/reliability.hpp"
#include "dpawno/training.hpp"
#include "dpawno/uq.hpp"
#include "dpawno/wno.hpp"

namespace dpawno {

struct SplitConfig {
  IcFamily family;
  std::size_t n = 32;
  std::size_t nt = 50;
};

struct EvalConfig {
  double probe_x = 0.0;
  double probe_y = 0.0;
  std::vector<std::size_t> probe_steps{48, 100};
  std::vector<std::size_t> snapshot_steps{48, 100};
  std::size_t horizon = 100;
  std::size_t pdf_points = kDefaultPdfPoints;
};

struct ReliabilityConfig {
  GrfSpec grf;
  LimitState limit;
  std::size_t n = 1000;
  std::size_t horizon = 100;
  bool diverged_is_failure = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t workers = 0;  // 0: all cores
  PdeSpec full;
  TermSet partial;
  std::size_t reference_refine = 1;
  SplitConfig train_data;
  SplitConfig test_data{IcFamily{}, 100, 100};
  WnoConfig model;
  TrainConfig train;
  EvalConfig eval;
  ReliabilityConfig reliability;

  PdeSpec partial_spec() const { return full.with_terms(partial); }
  std::size_t resolved_workers() const { return workers == 0 ? default_workers() : workers; }
};

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorCode::UsageError, "'" + s + "' is not a number");
  return v;
}

}  // namespace detail

/// A real number, optionally written as "<number>/pi", "<number>*pi" or "pi".
inline double parse_real(const std::string& text) {
  const std::string s = detail::trim(text);
  if (s == "pi") return std::numbers::pi;
  if (s.size() > 3 && s.substr(s.size() - 3) == "/pi") {
    return detail::parse_number(detail::trim(s.substr(0, s.size() - 3))) / std::numbers::pi;
  }
  if (s.size() > 3 && s.substr(s.size() - 3) == "*pi") {
    return detail::parse_number(detail::trim(s.substr(0, s.size() - 3))) * std::numbers::pi;
  }
  return detail::parse_number(s);
}

inline std::size_t parse_count(const std::string& text) {
  const double v = detail::parse_number(detail::trim(text));
  require(v >= 0.0 && std::floor(v) == v, ErrorCode::UsageError, "'" + text + "' is not a count");
  return static_cast<std::size_t>(v);
}

inline bool parse_bool(const std::string& text) {
  const std::string s = detail::trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorCode::UsageError, "'" + text + "' is not a boolean");
}

/// Comma-separated reals; "a..b" expands to the integers a, a+1, ..., b.
inline std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : detail::split(text, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_real(item));
      continue;
    }
    const double a = detail::parse_number(detail::trim(item.substr(0, dots)));
    const double b = detail::parse_number(detail::trim(item.substr(dots + 2)));
    require(std::floor(a) == a && std::floor(b) == b && a <= b, ErrorCode::UsageError,
            "bad integer range '" + item + "'");
    for (double v = a; v <= b; v += 1.0) out.push_back(v);
  }
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : detail::split(text, ',')) out.push_back(parse_count(item));
  return out;
}

inline std::pair<double, double> parse_range(const std::string& text) {
  const auto v = parse_reals(text);
  require(v.size() == 2 && v[0] <= v[1], ErrorCode::UsageError, "'" + text + "' is not lo,hi");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Key registry
// ---------------------------------------------------------------------------

struct ConfigKey {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

namespace detail {

inline void add_split_keys(std::vector<ConfigKey>& keys, const std::string& section,
                           SplitConfig ExperimentConfig::*member) {
  auto fam = [member](ExperimentConfig& c) -> IcFamily& { return (c.*member).family; };
  keys.push_back({section, "family", "cosine | sine | trig (half cosine, half sine) | square2d | shape2d | grf",
                  [fam](auto& c, auto& v) { fam(c).kind = parse_ic_kind(v); }});
  keys.push_back({section, "n", "number of initial conditions",
                  [member](auto& c, auto& v) { (c.*member).n = parse_count(v); }});
  keys.push_back({section, "nt", "stored time steps per trajectory",
                  [member](auto& c, auto& v) { (c.*member).nt = parse_count(v); }});
  keys.push_back({section, "cos_amplitudes", "enumerated amplitudes a of a cos(0.5 k pi x); 'a..b' ranges allowed",
                  [fam](auto& c, auto& v) { fam(c).cosine.amplitudes = parse_reals(v); }});
  keys.push_back({section, "cos_amplitude_range", "lo,hi: draw cosine amplitudes uniformly instead",
                  [fam](auto& c, auto& v) { fam(c).cosine.amplitude_range = parse_range(v); }});
  keys.push_back({section, "cos_wavenumbers", "wave numbers k of the cosine family",
                  [fam](auto& c, auto& v) { fam(c).cosine.wavenumbers = parse_reals(v); }});
  keys.push_back({section, "sin_amplitudes", "enumerated amplitudes a of a sin(k pi x)",
                  [fam](auto& c, auto& v) { fam(c).sine.amplitudes = parse_reals(v); }});
  keys.push_back({section, "sin_amplitude_range", "lo,hi: draw sine amplitudes uniformly instead",
                  [fam](auto& c, auto& v) { fam(c).sine.amplitude_range = parse_range(v); }});
  keys.push_back({section, "sin_wavenumbers", "wave numbers k of the sine family",
                  [fam](auto& c, auto& v) { fam(c).sine.wavenumbers = parse_reals(v); }});
  keys.push_back({section, "plateau_range", "lo,hi of the 2D plateau value u0",
                  [fam](auto& c, auto& v) { fam(c).plateau_range = parse_range(v); }});
  keys.push_back({section, "shapes", "2D plateau regions: square | large_square | triangle | circle",
                  [fam](auto& c, auto& v) {
                    fam(c).shapes.clear();
                    for (const auto& s : split(v, ',')) fam(c).shapes.push_back(parse_shape2d(s));
                  }});
  keys.push_back({section, "grf_kernel", "exp_sine_squared | rbf",
                  [fam](auto& c, auto& v) { fam(c).grf.kernel = parse_grf_kernel(v); }});
  keys.push_back({section, "grf_variance", "GRF process variance alpha",
                  [fam](auto& c, auto& v) { fam(c).grf.variance = parse_real(v); }});
  keys.push_back({section, "grf_length", "GRF length scale l",
                  [fam](auto& c, auto& v) { fam(c).grf.length = parse_real(v); }});
  keys.push_back({section, "grf_period", "GRF periodicity p",
                  [fam](auto& c, auto& v) { fam(c).grf.period = parse_real(v); }});
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"experiment", "name", "label written into outputs", [](auto& c, auto& v) { c.name = v; }});
    k.push_back({"experiment", "seed", "root seed; data, init, shuffle and GRF streams derive from it",
                 [](auto& c, auto& v) { c.seed = parse_count(v); }});
    k.push_back({"experiment", "output_dir", "directory for every artifact (must exist)",
                 [](auto& c, auto& v) { c.output_dir = v; }});
    k.push_back({"experiment", "workers", "threads; 0 uses all cores",
                 [](auto& c, auto& v) { c.workers = parse_count(v); }});

    k.push_back({"pde", "benchmark", "burgers1d | nagumo | allen_cahn | burgers2d", [](auto& c, auto& v) {
                   c.full.benchmark = parse_benchmark(v);
                   c.full.terms = full_terms(c.full.benchmark);
                 }});
    k.push_back({"pde", "diffusivity", "nu, epsilon or Gamma; accepts '0.3/pi'",
                 [](auto& c, auto& v) { c.full.diffusivity = parse_real(v); }});
    k.push_back({"pde", "alpha_speed", "Nagumo parameter alpha",
                 [](auto& c, auto& v) { c.full.alpha_speed = parse_real(v); }});
    k.push_back({"pde", "known_terms", "terms kept by the known physics (comma list or 'none')",
                 [](auto& c, auto& v) { c.partial = TermSet::parse(v); }});
    k.push_back({"pde", "bc", "dirichlet | periodic", [](auto& c, auto& v) {
                   if (v == "dirichlet") c.full.bc = BcKind::dirichlet;
                   else if (v == "periodic") c.full.bc = BcKind::periodic;
                   else fail(ErrorCode::UsageError, "bc must be dirichlet or periodic");
                 }});
    k.push_back({"pde", "bc_value", "Dirichlet boundary value", [](auto& c, auto& v) { c.full.bc_value = parse_real(v); }});
    k.push_back({"pde", "x_min", "domain start along x", [](auto& c, auto& v) { c.full.x_min = parse_real(v); }});
    k.push_back({"pde", "x_max", "domain end along x", [](auto& c, auto& v) { c.full.x_max = parse_real(v); }});
    k.push_back({"pde", "y_min", "domain start along y (2D)", [](auto& c, auto& v) { c.full.y_min = parse_real(v); }});
    k.push_back({"pde", "y_max", "domain end along y (2D)", [](auto& c, auto& v) { c.full.y_max = parse_real(v); }});
    k.push_back({"pde", "nx", "grid points along x", [](auto& c, auto& v) { c.full.nx = parse_count(v); }});
    k.push_back({"pde", "ny", "grid points along y (2D)", [](auto& c, auto& v) { c.full.ny = parse_count(v); }});
    k.push_back({"pde", "dt", "time step", [](auto& c, auto& v) { c.full.dt = parse_real(v); }});
    k.push_back({"pde", "advection", "central | upwind", [](auto& c, auto& v) {
                   if (v == "central") c.full.advection = AdvectionScheme::central;
                   else if (v == "upwind") c.full.advection = AdvectionScheme::upwind;
                   else fail(ErrorCode::UsageError, "advection must be central or upwind");
                 }});
    k.push_back({"pde", "reference_refine", "ground truth on an r-times finer grid (1 = same grid)",
                 [](auto& c, auto& v) { c.reference_refine = parse_count(v); }});

    detail::add_split_keys(k, "train_data", &ExperimentConfig::train_data);
    detail::add_split_keys(k, "test_data", &ExperimentConfig::test_data);

    k.push_back({"model", "width", "lifted channels", [](auto& c, auto& v) { c.model.width = parse_count(v); }});
    k.push_back({"model", "layers", "kernel integral layers", [](auto& c, auto& v) { c.model.layers = parse_count(v); }});
    k.push_back({"model", "fc1", "hidden width of the downlift", [](auto& c, auto& v) { c.model.fc1_dim = parse_count(v); }});
    k.push_back({"model", "wavelet", "db2 | db4 | db6",
                 [](auto& c, auto& v) { c.model.wavelet.family = parse_wavelet_family(v); }});
    k.push_back({"model", "levels", "wavelet decomposition levels",
                 [](auto& c, auto& v) { c.model.wavelet.levels = static_cast<int>(parse_count(v)); }});
    k.push_back({"model", "extension", "periodic | symmetric",
                 [](auto& c, auto& v) { c.model.wavelet.extension = parse_extension(v); }});
    k.push_back({"model", "bands", "coarsest | all: sub-bands carrying learnable mixing",
                 [](auto& c, auto& v) { c.model.bands = parse_kernel_bands(v); }});

    k.push_back({"train", "epochs", "training epochs", [](auto& c, auto& v) { c.train.epochs = parse_count(v); }});
    k.push_back({"train", "schedule", "unroll knots 'epoch:T,...', linear in between",
                 [](auto& c, auto& v) { c.train.schedule = UnrollSchedule::parse(v); }});
    k.push_back({"train", "batch_size", "samples per Adam step",
                 [](auto& c, auto& v) { c.train.batch_size = parse_count(v); }});
    k.push_back({"train", "learning_rate", "constant Adam step size",
                 [](auto& c, auto& v) { c.train.learning_rate = parse_real(v); }});
    k.push_back({"train", "clip_norm", "global gradient-norm clip; 0 disables",
                 [](auto& c, auto& v) { c.train.clip_norm = parse_real(v); }});
    k.push_back({"train", "checkpoint_every", "epochs between intermediate checkpoints; 0 disables",
                 [](auto& c, auto& v) { c.train.checkpoint_every = parse_count(v); }});

    k.push_back({"eval", "probe_x", "probe x coordinate (nearest grid point is used)",
                 [](auto& c, auto& v) { c.eval.probe_x = parse_real(v); }});
    k.push_back({"eval", "probe_y", "probe y coordinate (2D)", [](auto& c, auto& v) { c.eval.probe_y = parse_real(v); }});
    k.push_back({"eval", "probe_steps", "steps at which PDFs are exported",
                 [](auto& c, auto& v) { c.eval.probe_steps = parse_counts(v); }});
    k.push_back({"eval", "snapshot_steps", "steps at which trajectories are dumped",
                 [](auto& c, auto& v) { c.eval.snapshot_steps = parse_counts(v); }});
    k.push_back({"eval", "horizon", "rollout steps compared against ground truth",
                 [](auto& c, auto& v) { c.eval.horizon = parse_count(v); }});
    k.push_back({"eval", "pdf_points", "KDE grid size", [](auto& c, auto& v) { c.eval.pdf_points = parse_count(v); }});

    k.push_back({"reliability", "kernel", "exp_sine_squared | rbf",
                 [](auto& c, auto& v) { c.reliability.grf.kernel = parse_grf_kernel(v); }});
    k.push_back({"reliability", "variance", "GRF variance alpha",
                 [](auto& c, auto& v) { c.reliability.grf.variance = parse_real(v); }});
    k.push_back({"reliability", "length", "GRF length scale l",
                 [](auto& c, auto& v) { c.reliability.grf.length = parse_real(v); }});
    k.push_back({"reliability", "period", "GRF periodicity p",
                 [](auto& c, auto& v) { c.reliability.grf.period = parse_real(v); }});
    k.push_back({"reliability", "jitter", "initial covariance diagonal jitter",
                 [](auto& c, auto& v) { c.reliability.grf.jitter = parse_real(v); }});
    k.push_back({"reliability", "threshold", "g_t: failure when max |u| exceeds it",
                 [](auto& c, auto& v) { c.reliability.limit.threshold = parse_real(v); }});
    k.push_back({"reliability", "magnitude", "true: max |u|; false: signed max",
                 [](auto& c, auto& v) { c.reliability.limit.magnitude = parse_bool(v); }});
    k.push_back({"reliability", "n", "Monte Carlo samples", [](auto& c, auto& v) { c.reliability.n = parse_count(v); }});
    k.push_back({"reliability", "horizon", "rollout steps scanned for failure",
                 [](auto& c, auto& v) { c.reliability.horizon = parse_count(v); }});
    k.push_back({"reliability", "diverged_is_failure", "count blown-up rollouts as failures",
                 [](auto& c, auto& v) { c.reliability.diverged_is_failure = parse_bool(v); }});
    return k;
  }();
  return keys;
}

/// "[section]\n  key  help" listing of every accepted key.
inline std::string config_help() {
  std::ostringstream os;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      section = k.section;
      os << "\n[" << section << "]\n";
    }
    os << "  " << k.key << std::string(k.key.size() < 22 ? 22 - k.key.size() : 1, ' ') << k.help << '\n';
  }
  return os.str();
}

inline void set_config_value(ExperimentConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.section == section && k.key == key) {
      try {
        k.set(c, detail::trim(value));
      } catch (const Error& e) {
        fail(ErrorCode::UsageError, section + "." + key + ": " + e.what());
      } catch (const std::exception& e) {
        fail(ErrorCode::UsageError, section + "." + key + ": " + e.what());
      }
      return;
    }
  }
  fail(ErrorCode::UsageError, "unknown config key " + section + "." + key);
}

/// Applies "section.key=value".
inline void apply_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  require(eq != std::string::npos && dot != std::string::npos && dot < eq, ErrorCode::UsageError,
          "override '" + assignment + "' is not section.key=value");
  set_config_value(c, detail::trim(assignment.substr(0, dot)),
                   detail::trim(assignment.substr(dot + 1, eq - dot - 1)), assignment.substr(eq + 1));
}

/// Fills fields derived from others and checks every block before any compute.
inline void finalize(ExperimentConfig& c) {
  c.full.terms = full_terms(c.full.benchmark);
  if (!c.full.is_2d()) c.full.ny = 1;
  c.model.state_channels = c.full.channels();
  c.model.spatial_dims = c.full.spatial_dims();
  validate(c.full);
  require(c.partial.subset_of(c.full.terms), ErrorCode::UnsupportedTermForBenchmark,
          "known terms {" + c.partial.str() + "} not valid for " + to_string(c.full.benchmark));
  c.model.validate();
  c.train.schedule.validate();
  require(c.train.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(c.train.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be > 0");
  validate(c.reliability.grf);
  if (c.train_data.family.kind == IcKind::grf) validate(c.train_data.family.grf);
  if (c.test_data.family.kind == IcKind::grf) validate(c.test_data.family.grf);
  require(std::isfinite(c.reliability.limit.threshold), ErrorCode::InvalidArgument,
          "threshold must be finite");
  require(c.reference_refine >= 1, ErrorCode::InvalidArgument, "reference_refine must be >= 1");
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::UsageError, std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  // The benchmark decides the term set, so it is applied first.
  if (auto b = tree.get_optional<std::string>("pde.benchmark")) set_config_value(c, "pde", "benchmark", *b);
  for (const auto& [section, body] : tree) {
    require(body.data().empty(), ErrorCode::UsageError,
            "config key '" + section + "' outside any section");
    for (const auto& [key, value] : body) set_config_value(c, section, key, value.data());
  }
  for (const auto& o : overrides) apply_override(c, o);
  finalize(c);
  return c;
}

#ifndef DPAWNO_PRESET_DIR
#define DPAWNO_PRESET_DIR "presets"
#endif

/// Preset directory: $DPAWNO_PRESETS if set, else the source tree's presets/.
inline std::filesystem::path preset_dir() {
  if (const char* env = std::getenv("DPAWNO_PRESETS")) return env;
  return DPAWNO_PRESET_DIR;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(preset_dir(), ec)) {
    if (e.path().extension() == ".ini") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

/// `source` is a path to an INI file or the name of a shipped preset.
inline ExperimentConfig load_config(const std::string& source, const std::vector<std::string>& overrides = {}) {
  std::filesystem::path path = source;
  if (!std::filesystem::exists(path)) path = preset_dir() / (source + ".ini");
  require(std::filesystem::exists(path), ErrorCode::IoError,
          "no config file or preset named '" + source + "'");
  const auto bytes = io::read_file(path);
  return parse_config_text(std::string(bytes.begin(), bytes.end()), overrides);
}

}  // namespace dpawno
