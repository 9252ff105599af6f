#pragma once

// Initial-condition families, ground-truth trajectory generation with the
// full-physics stepper, and the dataset file format.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dpawno/error.hpp"
#include "dpawno/grf.hpp"
#include "dpawno/io.hpp"
#include "dpawno/parallel.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

/// cosine: a cos(0.5 k pi x); sine: a sin(k pi x); trig: half cosine, half sine;
/// square2d / shape2d: plateau a inside a region, 1 elsewhere, on both channels.
enum class IcKind { cosine, sine, trig, square2d, shape2d, grf, explicit_values };

enum class Shape2d { square, large_square, triangle, circle };

inline std::string to_string(IcKind k) {
  switch (k) {
    case IcKind::cosine: return "cosine";
    case IcKind::sine: return "sine";
    case IcKind::trig: return "trig";
    case IcKind::square2d: return "square2d";
    case IcKind::shape2d: return "shape2d";
    case IcKind::grf: return "grf";
    case IcKind::explicit_values: return "explicit";
  }
  return "?";
}

inline IcKind parse_ic_kind(const std::string& s) {
  for (IcKind k : {IcKind::cosine, IcKind::sine, IcKind::trig, IcKind::square2d, IcKind::shape2d,
                   IcKind::grf, IcKind::explicit_values}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown initial-condition family '" + s + "'");
}

inline std::string to_string(Shape2d s) {
  switch (s) {
    case Shape2d::square: return "square";
    case Shape2d::large_square: return "large_square";
    case Shape2d::triangle: return "triangle";
    case Shape2d::circle: return "circle";
  }
  return "?";
}

inline Shape2d parse_shape2d(const std::string& s) {
  for (Shape2d k : {Shape2d::square, Shape2d::large_square, Shape2d::triangle, Shape2d::circle}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown 2D shape '" + s + "'");
}

/// Amplitudes and wave numbers of one trigonometric family. With a range the
/// amplitude is drawn uniformly and the wave number uniformly from the set;
/// without one, draws enumerate (amplitude, wave number) pairs without replacement.
struct TrigParams {
  std::vector<double> amplitudes;
  std::vector<double> wavenumbers;
  std::optional<std::pair<double, double>> amplitude_range;

  std::size_t cardinality() const noexcept { return amplitudes.size() * wavenumbers.size(); }
};

struct IcFamily {
  IcKind kind = IcKind::trig;
  TrigParams cosine;
  TrigParams sine;
  std::pair<double, double> plateau_range{0.0, 5.0};
  std::vector<Shape2d> shapes{Shape2d::square};
  GrfSpec grf;
  std::vector<Tensor> explicit_values;

  /// Number of distinct members for enumerated families; nullopt when continuous.
  std::optional<std::size_t> cardinality() const {
    switch (kind) {
      case IcKind::cosine:
        if (cosine.amplitude_range) return std::nullopt;
        return cosine.cardinality();
      case IcKind::sine:
        if (sine.amplitude_range) return std::nullopt;
        return sine.cardinality();
      case IcKind::trig:
        if (cosine.amplitude_range || sine.amplitude_range) return std::nullopt;
        return cosine.cardinality() + sine.cardinality();
      case IcKind::explicit_values: return explicit_values.size();
      default: return std::nullopt;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    auto list = [&](const std::vector<double>& v) {
      os << '{';
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      os << '}';
    };
    auto trig = [&](const char* name, const TrigParams& t) {
      os << name << "(a=";
      if (t.amplitude_range) {
        os << "U(" << t.amplitude_range->first << "," << t.amplitude_range->second << ")";
      } else {
        list(t.amplitudes);
      }
      os << ",k=";
      list(t.wavenumbers);
      os << ')';
    };
    switch (kind) {
      case IcKind::cosine: trig("cosine", cosine); break;
      case IcKind::sine: trig("sine", sine); break;
      case IcKind::trig:
        trig("cosine", cosine);
        os << '+';
        trig("sine", sine);
        break;
      case IcKind::square2d:
      case IcKind::shape2d:
        os << to_string(kind) << "(u0=U(" << plateau_range.first << "," << plateau_range.second
           << "),shapes=";
        for (std::size_t i = 0; i < shapes.size(); ++i) os << (i ? "|" : "") << to_string(shapes[i]);
        os << ')';
        break;
      case IcKind::grf:
        os << "grf(" << to_string(grf.kernel) << ",alpha=" << grf.variance << ",l=" << grf.length
           << ",p=" << grf.period << ")";
        break;
      case IcKind::explicit_values: os << "explicit(" << explicit_values.size() << ")"; break;
    }
    return os.str();
  }
};

/// One drawn member of a family, renderable on any grid of the benchmark.
struct IcDraw {
  IcKind kind = IcKind::cosine;
  double amplitude = 0.0;
  double wavenumber = 0.0;
  Shape2d shape = Shape2d::square;
  std::size_t index = 0;  // grf / explicit draws
};

namespace detail {

inline std::vector<std::pair<double, double>> enumerate_pairs(const TrigParams& t) {
  std::vector<std::pair<double, double>> out;
  for (double k : t.wavenumbers) {
    for (double a : t.amplitudes) out.emplace_back(a, k);
  }
  return out;
}

/// `count` trig draws: all pairs in order when count equals the family size,
/// else a seeded sample without replacement; continuous families draw freely.
inline std::vector<IcDraw> draw_trig(IcKind kind, const TrigParams& t, std::size_t count, Rng& rng) {
  std::vector<IcDraw> out;
  if (t.amplitude_range) {
    require(!t.wavenumbers.empty(), ErrorCode::InvalidArgument, "no wave numbers for " + to_string(kind));
    for (std::size_t i = 0; i < count; ++i) {
      const double a = uniform(rng, t.amplitude_range->first, t.amplitude_range->second);
      const auto k = std::uniform_int_distribution<std::size_t>(0, t.wavenumbers.size() - 1)(rng);
      out.push_back({kind, a, t.wavenumbers[k]});
    }
    return out;
  }
  auto pairs = enumerate_pairs(t);
  require(count <= pairs.size(), ErrorCode::CountExceedsFamily,
          "requested " + std::to_string(count) + " " + to_string(kind) + " conditions from a family of " +
              std::to_string(pairs.size()));
  if (count < pairs.size()) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(count);
  }
  for (const auto& [a, k] : pairs) out.push_back({kind, a, k});
  return out;
}

inline bool inside(Shape2d s, double x, double y) {
  switch (s) {
    case Shape2d::square: return x >= 0.5 && x <= 1.5 && y >= 0.5 && y <= 1.5;
    case Shape2d::large_square: return x >= 0.25 && x <= 1.75 && y >= 0.25 && y <= 1.75;
    case Shape2d::triangle: {
      // Vertices (0.5, 0.5), (1.5, 0.5), (1.0, 1.5).
      if (y < 0.5 || y > 1.5) return false;
      const double half = 0.5 * (1.5 - y);
      return std::abs(x - 1.0) <= half;
    }
    case Shape2d::circle: return (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0) <= 0.25;
  }
  return false;
}

}  // namespace detail

/// Draws `count` family members; deterministic in seed.
inline std::vector<IcDraw> draw_ics(const IcFamily& f, std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::data);
  if (auto card = f.cardinality(); card) {
    require(count <= *card, ErrorCode::CountExceedsFamily,
            "requested " + std::to_string(count) + " conditions from a family of " +
                std::to_string(*card));
  }
  switch (f.kind) {
    case IcKind::cosine: return detail::draw_trig(IcKind::cosine, f.cosine, count, rng);
    case IcKind::sine: return detail::draw_trig(IcKind::sine, f.sine, count, rng);
    case IcKind::trig: {
      const std::size_t n_cos = (count + 1) / 2;
      auto out = detail::draw_trig(IcKind::cosine, f.cosine, n_cos, rng);
      auto sines = detail::draw_trig(IcKind::sine, f.sine, count - n_cos, rng);
      out.insert(out.end(), sines.begin(), sines.end());
      return out;
    }
    case IcKind::square2d:
    case IcKind::shape2d: {
      require(!f.shapes.empty(), ErrorCode::InvalidArgument, "no shapes given");
      std::vector<IcDraw> out;
      for (std::size_t i = 0; i < count; ++i) {
        IcDraw d{f.kind};
        d.amplitude = uniform(rng, f.plateau_range.first, f.plateau_range.second);
        d.shape = f.kind == IcKind::square2d ? Shape2d::square : f.shapes[i % f.shapes.size()];
        out.push_back(d);
      }
      return out;
    }
    case IcKind::grf:
    case IcKind::explicit_values: {
      std::vector<IcDraw> out;
      for (std::size_t i = 0; i < count; ++i) {
        IcDraw d{f.kind};
        d.index = i;
        out.push_back(d);
      }
      return out;
    }
  }
  return {};
}

/// Evaluates draws on the grid of `s` and applies its boundary condition.
inline std::vector<GridField> render_ics(const IcFamily& f, const std::vector<IcDraw>& draws,
                                         const PdeSpec& s, std::uint64_t seed) {
  const Tensor grid = grid_coordinates(s);
  const std::size_t n = s.points();
  std::optional<GrfSampler> sampler;
  std::vector<GridField> out;
  out.reserve(draws.size());
  for (const IcDraw& d : draws) {
    Tensor u(s.field_shape());
    switch (d.kind) {
      case IcKind::cosine:
      case IcKind::sine:
      case IcKind::trig:
        require(!s.is_2d(), ErrorCode::InvalidArgument, "trigonometric families are 1D");
        for (std::size_t i = 0; i < n; ++i) {
          const double x = grid[i];
          u[i] = d.kind == IcKind::cosine
                     ? d.amplitude * std::cos(0.5 * d.wavenumber * std::numbers::pi * x)
                     : d.amplitude * std::sin(d.wavenumber * std::numbers::pi * x);
        }
        break;
      case IcKind::square2d:
      case IcKind::shape2d:
        require(s.is_2d(), ErrorCode::InvalidArgument, "plateau families are 2D");
        for (std::size_t c = 0; c < s.channels(); ++c) {
          for (std::size_t i = 0; i < n; ++i) {
            u[c * n + i] = detail::inside(d.shape, grid[i], grid[n + i]) ? d.amplitude : 1.0;
          }
        }
        break;
      case IcKind::grf: {
        if (!sampler) sampler.emplace(f.grf, s);
        Rng rng = make_rng(seed, Stream::grf, d.index);
        u = sampler->draw(rng);
        break;
      }
      case IcKind::explicit_values:
        u = f.explicit_values.at(d.index);
        require(u.shape() == s.field_shape(), ErrorCode::ShapeMismatch,
                "explicit condition " + shape_str(u.shape()) + " vs grid " +
                    shape_str(s.field_shape()));
        break;
    }
    out.push_back(apply_bc(GridField{std::move(u), 0}, s));
  }
  return out;
}

inline std::vector<GridField> sample_ics(const IcFamily& f, std::size_t count, const PdeSpec& s,
                                         std::uint64_t seed) {
  return render_ics(f, draw_ics(f, count, seed), s, seed);
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Dataset {
  PdeSpec spec;
  std::vector<std::vector<Tensor>> trajectories;  // [sample][step], step 0 is the IC
  std::uint64_t seed = 0;
  std::string family;

  std::size_t samples() const noexcept { return trajectories.size(); }
  std::size_t steps() const noexcept { return trajectories.empty() ? 0 : trajectories[0].size() - 1; }
  GridField ic(std::size_t i) const { return {trajectories.at(i).at(0), 0}; }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    const auto& s = a.spec;
    const auto& t = b.spec;
    return s.benchmark == t.benchmark && s.diffusivity == t.diffusivity &&
           s.alpha_speed == t.alpha_speed && s.terms == t.terms && s.bc == t.bc &&
           s.bc_value == t.bc_value && s.x_min == t.x_min && s.x_max == t.x_max &&
           s.y_min == t.y_min && s.y_max == t.y_max && s.nx == t.nx && s.ny == t.ny &&
           s.dt == t.dt && s.advection == t.advection && a.seed == b.seed &&
           a.family == b.family && a.trajectories == b.trajectories;
  }
};

/// Full-physics trajectory from `ic` with `steps` Euler steps.
inline std::vector<Tensor> solve(const PdeSpec& s, const Tensor& ic, std::size_t steps) {
  std::vector<Tensor> traj;
  traj.reserve(steps + 1);
  traj.push_back(ic);
  GridField u{ic, 0};
  for (std::size_t t = 0; t < steps; ++t) {
    u = euler_step(u, s);
    traj.push_back(u.values);
  }
  return traj;
}

/// Reference refinement: factor r refines space by r and time by r^2 (fixed
/// diffusion number) and samples the result back onto the coarse grid.
inline PdeSpec refined_spec(const PdeSpec& s, std::size_t r) {
  PdeSpec f = s;
  auto refine = [&](std::size_t n) { return s.bc == BcKind::dirichlet ? (n - 1) * r + 1 : n * r; };
  f.nx = refine(s.nx);
  if (s.is_2d()) f.ny = refine(s.ny);
  f.dt = s.dt / static_cast<double>(r * r);
  return f;
}

inline Tensor coarsen(const Tensor& fine, const PdeSpec& coarse, std::size_t r) {
  Tensor out(coarse.field_shape());
  const std::size_t fnx = coarse.bc == BcKind::dirichlet ? (coarse.nx - 1) * r + 1 : coarse.nx * r;
  const std::size_t fny = coarse.is_2d()
                              ? (coarse.bc == BcKind::dirichlet ? (coarse.ny - 1) * r + 1 : coarse.ny * r)
                              : 1;
  const std::size_t ny = coarse.is_2d() ? coarse.ny : 1;
  for (std::size_t c = 0; c < coarse.channels(); ++c) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < coarse.nx; ++i) {
        out[(c * ny + j) * coarse.nx + i] = fine[(c * fny + j * r) * fnx + i * r];
      }
    }
  }
  return out;
}

struct GenerateOptions {
  std::size_t workers = 1;
  std::size_t refine = 1;  // > 1 enables the refined reference solver
};

/// Ground-truth dataset: N conditions from `family`, each stepped Nt times with full physics.
inline Dataset generate(const PdeSpec& full, const IcFamily& family, std::size_t n, std::size_t nt,
                        std::uint64_t seed, const GenerateOptions& opt = {}) {
  validate(full);
  require(full.terms == full_terms(full.benchmark), ErrorCode::UnsupportedTermForBenchmark,
          "ground truth needs the full term set, got {" + full.terms.str() + "}");
  require(opt.refine >= 1, ErrorCode::InvalidArgument, "refine factor must be >= 1");
  const auto draws = draw_ics(family, n, seed);
  Dataset d;
  d.spec = full;
  d.seed = seed;
  d.family = family.describe();
  if (opt.refine == 1) {
    const auto ics = render_ics(family, draws, full, seed);
    d.trajectories = parallel_map<std::vector<Tensor>>(n, opt.workers, [&](std::size_t i) {
      try {
        return solve(full, ics[i].values, nt);
      } catch (const Error& e) {
        fail(e.code(), "sample " + std::to_string(i) + ": " + e.what());
      }
    });
    return d;
  }
  require(family.kind != IcKind::grf && family.kind != IcKind::explicit_values,
          ErrorCode::InvalidArgument, "refined reference needs an analytic family");
  const std::size_t r = opt.refine;
  const PdeSpec fine = refined_spec(full, r);
  const auto ics = render_ics(family, draws, fine, seed);
  d.trajectories = parallel_map<std::vector<Tensor>>(n, opt.workers, [&](std::size_t i) {
    std::vector<Tensor> traj{coarsen(ics[i].values, full, r)};
    GridField u = ics[i];
    try {
      for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t k = 0; k < r * r; ++k) u = euler_step(u, fine);
        traj.push_back(coarsen(u.values, full, r));
      }
    } catch (const Error& e) {
      fail(e.code(), "sample " + std::to_string(i) + ": " + e.what());
    }
    return traj;
  });
  return d;
}

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Header, then every state as little-endian f64 in [sample][step][field] order,
/// then the FNV-1a 64 checksum of that payload.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  const auto& s = d.spec;
  io::Writer w;
  w.pod(std::array<char, 4>{'D', 'P', 'D', 'S'});
  w.pod(kDatasetVersion);
  w.str(to_string(s.benchmark));
  w.str(s.terms.str());
  w.str(s.bc == BcKind::dirichlet ? "dirichlet" : "periodic");
  w.str(s.advection == AdvectionScheme::central ? "central" : "upwind");
  for (double v : {s.bc_value, s.diffusivity, s.alpha_speed, s.x_min, s.x_max, s.y_min, s.y_max,
                   s.dt, s.dx(), s.is_2d() ? s.dy() : 0.0}) {
    w.pod(v);
  }
  for (std::uint64_t v : {std::uint64_t(d.samples()), std::uint64_t(d.steps()), std::uint64_t(s.nx),
                          std::uint64_t(s.ny), std::uint64_t(s.channels()), d.seed}) {
    w.pod(v);
  }
  w.str(d.family);
  const std::size_t payload_start = w.size();
  for (const auto& traj : d.trajectories) {
    require(traj.size() == d.steps() + 1, ErrorCode::ShapeMismatch, "ragged trajectories");
    for (const auto& st : traj) w.doubles(st.vec());
  }
  const std::uint64_t sum = io::fnv1a64(w.bytes().data() + payload_start, w.size() - payload_start);
  w.pod(sum);
  io::write_file(path, w.bytes());
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  io::Reader r(io::read_file(path));
  const auto magic = r.pod<std::array<char, 4>>();
  require(std::string(magic.data(), 4) == "DPDS", ErrorCode::IoError,
          "'" + path.string() + "' is not a dataset file");
  const auto version = r.pod<std::uint32_t>();
  require(version <= kDatasetVersion, ErrorCode::FormatVersionMismatch,
          "dataset version " + std::to_string(version) + " is newer than supported " +
              std::to_string(kDatasetVersion));
  Dataset d;
  auto& s = d.spec;
  s.benchmark = parse_benchmark(r.str());
  s.terms = TermSet::parse(r.str());
  s.bc = r.str() == "dirichlet" ? BcKind::dirichlet : BcKind::periodic;
  s.advection = r.str() == "central" ? AdvectionScheme::central : AdvectionScheme::upwind;
  s.bc_value = r.pod<double>();
  s.diffusivity = r.pod<double>();
  s.alpha_speed = r.pod<double>();
  s.x_min = r.pod<double>();
  s.x_max = r.pod<double>();
  s.y_min = r.pod<double>();
  s.y_max = r.pod<double>();
  s.dt = r.pod<double>();
  r.pod<double>();  // dx, derived
  r.pod<double>();  // dy, derived
  const auto n = r.pod<std::uint64_t>();
  const auto nt = r.pod<std::uint64_t>();
  s.nx = r.pod<std::uint64_t>();
  s.ny = r.pod<std::uint64_t>();
  const auto channels = r.pod<std::uint64_t>();
  d.seed = r.pod<std::uint64_t>();
  d.family = r.str();
  require(channels == s.channels(), ErrorCode::ShapeMismatch, "channel count disagrees with benchmark");
  const std::size_t field = shape_size(s.field_shape());
  const std::size_t payload_bytes = n * (nt + 1) * field * sizeof(double);
  require(r.remaining() >= payload_bytes + 8, ErrorCode::ChecksumMismatch,
          "dataset '" + path.string() + "' is truncated");
  const std::uint64_t expect = io::fnv1a64(r.at(r.pos()), payload_bytes);
  d.trajectories.resize(n);
  for (auto& traj : d.trajectories) {
    for (std::size_t t = 0; t <= nt; ++t) traj.emplace_back(s.field_shape(), r.doubles(field));
  }
  require(r.pod<std::uint64_t>() == expect, ErrorCode::ChecksumMismatch,
          "dataset '" + path.string() + "' payload checksum mismatch");
  return d;
}

}  // namespace dpawno
