#pragma once

// Finite-difference right-hand sides for the four benchmark PDEs, term masks
// for building "known physics" variants, and the augmented explicit Euler
// step u' = bc(u + dt * (rhs(u) + correction)).
//
// Every operation runs on a Tape so the same code path serves data generation
// (evaluation-only tape) and training (recording tape). Terms are summed in a
// fixed order and each equation has at most two terms, so
// rhs(partial) + rhs(missing) == rhs(full) holds bit-for-bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpawno/autodiff.hpp"
#include "dpawno/error.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

enum class Benchmark { burgers1d, nagumo, allen_cahn, burgers2d };

/// diffusion_x / diffusion_y only apply to burgers2d: the viscous term of the
/// x-velocity (u1) and y-velocity (u2) equations respectively.
enum class Term : std::uint8_t { advection, diffusion, diffusion_x, diffusion_y, reaction };
enum class BcKind { dirichlet, periodic };
enum class AdvectionScheme { central, upwind };

inline constexpr std::array<Term, 5> kAllTerms = {Term::advection, Term::diffusion,
                                                  Term::diffusion_x, Term::diffusion_y,
                                                  Term::reaction};

inline std::string to_string(Benchmark b) {
  switch (b) {
    case Benchmark::burgers1d: return "burgers1d";
    case Benchmark::nagumo: return "nagumo";
    case Benchmark::allen_cahn: return "allen_cahn";
    case Benchmark::burgers2d: return "burgers2d";
  }
  return "?";
}

inline Benchmark parse_benchmark(const std::string& s) {
  if (s == "burgers1d") return Benchmark::burgers1d;
  if (s == "nagumo") return Benchmark::nagumo;
  if (s == "allen_cahn") return Benchmark::allen_cahn;
  if (s == "burgers2d") return Benchmark::burgers2d;
  fail(ErrorCode::InvalidArgument, "unknown benchmark '" + s + "'");
}

inline std::string to_string(Term t) {
  switch (t) {
    case Term::advection: return "advection";
    case Term::diffusion: return "diffusion";
    case Term::diffusion_x: return "diffusion_x";
    case Term::diffusion_y: return "diffusion_y";
    case Term::reaction: return "reaction";
  }
  return "?";
}

inline Term parse_term(const std::string& s) {
  for (Term t : kAllTerms) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorCode::InvalidArgument, "unknown term '" + s + "'");
}

class TermSet {
 public:
  TermSet() = default;
  TermSet(std::initializer_list<Term> terms) {
    for (Term t : terms) insert(t);
  }

  void insert(Term t) noexcept { bits_ |= bit(t); }
  void erase(Term t) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(t)); }
  bool contains(Term t) const noexcept { return (bits_ & bit(t)) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  bool subset_of(TermSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }
  TermSet minus(TermSet o) const noexcept {
    TermSet r;
    r.bits_ = static_cast<std::uint8_t>(bits_ & ~o.bits_);
    return r;
  }

  std::vector<Term> list() const {
    std::vector<Term> out;
    for (Term t : kAllTerms) {
      if (contains(t)) out.push_back(t);
    }
    return out;
  }

  /// Comma-separated names; empty set renders as "none".
  std::string str() const {
    std::string s;
    for (Term t : list()) s += (s.empty() ? "" : ",") + to_string(t);
    return s.empty() ? "none" : s;
  }

  static TermSet parse(const std::string& csv) {
    TermSet out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
      const std::size_t next = csv.find(',', pos);
      std::string item = csv.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      item = b == std::string::npos ? "" : item.substr(b, e - b + 1);
      if (!item.empty() && item != "none") out.insert(parse_term(item));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return out;
  }

  friend bool operator==(TermSet a, TermSet b) { return a.bits_ == b.bits_; }

 private:
  static std::uint8_t bit(Term t) noexcept {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }
  std::uint8_t bits_ = 0;
};

inline TermSet full_terms(Benchmark b) {
  switch (b) {
    case Benchmark::burgers1d: return {Term::advection, Term::diffusion};
    case Benchmark::nagumo: return {Term::diffusion, Term::reaction};
    case Benchmark::allen_cahn: return {Term::diffusion, Term::reaction};
    case Benchmark::burgers2d: return {Term::advection, Term::diffusion_x, Term::diffusion_y};
  }
  return {};
}

struct PdeSpec {
  Benchmark benchmark = Benchmark::burgers1d;
  double diffusivity = 0.0;  // nu (Burgers), epsilon (Nagumo), Gamma (Allen-Cahn)
  double alpha_speed = 0.0;  // Nagumo cubic root
  TermSet terms;
  BcKind bc = BcKind::periodic;
  double bc_value = 0.0;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  std::size_t nx = 64;
  std::size_t ny = 1;
  double dt = 1e-4;
  AdvectionScheme advection = AdvectionScheme::central;

  bool is_2d() const noexcept { return benchmark == Benchmark::burgers2d; }
  std::size_t channels() const noexcept { return is_2d() ? 2 : 1; }
  std::size_t spatial_dims() const noexcept { return is_2d() ? 2 : 1; }

  static double spacing(double lo, double hi, std::size_t n, BcKind bc) {
    return bc == BcKind::dirichlet ? (hi - lo) / static_cast<double>(n - 1)
                                   : (hi - lo) / static_cast<double>(n);
  }
  double dx() const { return spacing(x_min, x_max, nx, bc); }
  double dy() const { return spacing(y_min, y_max, ny, bc); }

  Shape field_shape() const {
    return is_2d() ? Shape{channels(), ny, nx} : Shape{channels(), nx};
  }

  std::size_t points() const noexcept { return is_2d() ? nx * ny : nx; }

  /// Same grid and parameters, different retained terms.
  PdeSpec with_terms(TermSet t) const {
    PdeSpec s = *this;
    s.terms = t;
    return s;
  }
};

inline void validate(const PdeSpec& s) {
  require(s.terms.subset_of(full_terms(s.benchmark)), ErrorCode::UnsupportedTermForBenchmark,
          "terms {" + s.terms.str() + "} not all valid for " + to_string(s.benchmark));
  require(s.nx >= 3 && (!s.is_2d() || s.ny >= 3), ErrorCode::InvalidArgument,
          "grid needs at least 3 points per axis");
  require(s.dt > 0.0 && std::isfinite(s.dt), ErrorCode::InvalidArgument, "dt must be positive");
  require(s.x_max > s.x_min && (!s.is_2d() || s.y_max > s.y_min), ErrorCode::InvalidArgument,
          "empty spatial domain");
  require(s.diffusivity >= 0.0, ErrorCode::InvalidArgument, "diffusivity must be >= 0");
}

/// Explicit-diffusion stability number nu*dt*sum(1/h^2); > 0.5 is unstable.
inline double diffusion_number(const PdeSpec& s) {
  double inv = 1.0 / (s.dx() * s.dx());
  if (s.is_2d()) inv += 1.0 / (s.dy() * s.dy());
  return s.diffusivity * s.dt * inv;
}

/// Non-empty when an active diffusion term violates the explicit CFL bound.
inline std::optional<std::string> cfl_warning(const PdeSpec& s) {
  const bool diffusing = s.terms.contains(Term::diffusion) || s.terms.contains(Term::diffusion_x) ||
                         s.terms.contains(Term::diffusion_y);
  const double r = diffusion_number(s);
  if (diffusing && r > 0.5) {
    return "diffusion number " + std::to_string(r) + " exceeds 0.5; explicit Euler may be unstable";
  }
  return std::nullopt;
}

/// Coordinates as input channels: [1, nx] holding x, or [2, ny, nx] holding (x, y).
inline Tensor grid_coordinates(const PdeSpec& s) {
  const double dx = s.dx();
  if (!s.is_2d()) {
    Tensor g(Shape{1, s.nx});
    for (std::size_t i = 0; i < s.nx; ++i) g[i] = s.x_min + static_cast<double>(i) * dx;
    return g;
  }
  const double dy = s.dy();
  Tensor g(Shape{2, s.ny, s.nx});
  const std::size_t plane = s.nx * s.ny;
  for (std::size_t j = 0; j < s.ny; ++j) {
    for (std::size_t i = 0; i < s.nx; ++i) {
      g[j * s.nx + i] = s.x_min + static_cast<double>(i) * dx;
      g[plane + j * s.nx + i] = s.y_min + static_cast<double>(j) * dy;
    }
  }
  return g;
}

/// Nearest grid index to a physical coordinate along one axis.
inline std::size_t nearest_index(double x, double lo, double h, std::size_t n) {
  const double r = std::round((x - lo) / h);
  if (r <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(r), n - 1);
}

struct GridField {
  Tensor values;
  int time_index = 0;
};

// ---------------------------------------------------------------------------
// Differentiable stencil primitives
// ---------------------------------------------------------------------------

struct StencilTaps {
  std::vector<int> offsets;
  std::vector<double> coeffs;
};

inline StencilTaps central_first_derivative(double h) {
  const double c = 1.0 / (2.0 * h);
  return {{-1, 1}, {-c, c}};
}

inline StencilTaps central_second_derivative(double h) {
  const double c = 1.0 / (h * h);
  return {{-1, 0, 1}, {c, -2.0 * c, c}};
}

namespace detail {

struct LineView {
  std::size_t outer, n, inner;
};

inline LineView line_view(const Shape& s, int axis_from_end) {
  const std::size_t a = s.size() - static_cast<std::size_t>(axis_from_end);
  LineView v{1, s[a], 1};
  for (std::size_t i = 0; i < a; ++i) v.outer *= s[i];
  for (std::size_t i = a + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace detail

/// out[i] = sum_k coeffs[k] * u[i + offsets[k]] along one axis, accumulated in
/// tap order from 0.0. Periodic wraps; Dirichlet leaves 0 where a tap falls
/// outside the axis (those entries are overwritten by the boundary condition).
inline Var stencil(Var u, int axis_from_end, const StencilTaps& taps, BcKind bc) {
  const Shape us = u.shape();
  const auto lv = detail::line_view(us, axis_from_end);
  const auto n = static_cast<std::ptrdiff_t>(lv.n);
  int reach = 0;
  for (int o : taps.offsets) reach = std::max(reach, std::abs(o));
  const auto& uv = u.value();
  Tensor out(us);
  auto for_each_tap = [lv, n, reach, bc, taps](auto&& fn) {
    for (std::size_t o = 0; o < lv.outer; ++o) {
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (bc == BcKind::dirichlet && (i < reach || i >= n - reach)) continue;
        for (std::size_t q = 0; q < lv.inner; ++q) {
          const std::size_t dst = (o * lv.n + static_cast<std::size_t>(i)) * lv.inner + q;
          for (std::size_t k = 0; k < taps.offsets.size(); ++k) {
            std::ptrdiff_t j = i + taps.offsets[k];
            if (bc == BcKind::periodic) j = ((j % n) + n) % n;
            const std::size_t src = (o * lv.n + static_cast<std::size_t>(j)) * lv.inner + q;
            fn(dst, src, taps.coeffs[k]);
          }
        }
      }
    }
  };
  for_each_tap([&](std::size_t dst, std::size_t src, double c) { out[dst] += c * uv[src]; });
  const std::size_t iu = u.id();
  return u.tape().push(Primitive::Stencil, {iu}, std::move(out),
                       [iu, us, for_each_tap](const Tensor& g, GradSlots& grads) {
                         auto& gu = grad_slot(grads, iu, us);
                         for_each_tap([&](std::size_t dst, std::size_t src, double c) {
                           gu[src] += c * g[dst];
                         });
                       });
}

/// vel * d(field)/d(axis) with one-sided differences chosen by the sign of vel.
inline Var upwind(Var vel, Var field, int axis_from_end, double h, BcKind bc) {
  require(vel.shape() == field.shape(), ErrorCode::ShapeMismatch,
          "upwind " + shape_str(vel.shape()) + " vs " + shape_str(field.shape()));
  const Shape s = field.shape();
  const auto lv = detail::line_view(s, axis_from_end);
  const auto n = static_cast<std::ptrdiff_t>(lv.n);
  const double inv_h = 1.0 / h;
  // For each point: (dst, lower neighbour, upper neighbour); skipped on Dirichlet edges.
  auto for_each_point = [lv, n, bc](auto&& fn) {
    for (std::size_t o = 0; o < lv.outer; ++o) {
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (bc == BcKind::dirichlet && (i == 0 || i == n - 1)) continue;
        const std::ptrdiff_t im = bc == BcKind::periodic ? (i - 1 + n) % n : i - 1;
        const std::ptrdiff_t ip = bc == BcKind::periodic ? (i + 1) % n : i + 1;
        for (std::size_t q = 0; q < lv.inner; ++q) {
          auto at = [&](std::ptrdiff_t j) {
            return (o * lv.n + static_cast<std::size_t>(j)) * lv.inner + q;
          };
          fn(at(i), at(im), at(ip));
        }
      }
    }
  };
  const auto& v = vel.value();
  const auto& f = field.value();
  Tensor out(s);
  for_each_point([&](std::size_t c, std::size_t m, std::size_t p) {
    const double d = v[c] >= 0.0 ? (f[c] - f[m]) * inv_h : (f[p] - f[c]) * inv_h;
    out[c] = v[c] * d;
  });
  Tape* t = &vel.tape();
  const std::size_t iv = vel.id(), iff = field.id();
  return t->push(Primitive::Upwind, {iv, iff}, std::move(out),
                 [t, iv, iff, s, inv_h, for_each_point](const Tensor& g, GradSlots& grads) {
                   const auto& v = t->value(iv);
                   const auto& f = t->value(iff);
                   auto& gv = grad_slot(grads, iv, s);
                   auto& gf = grad_slot(grads, iff, s);
                   for_each_point([&](std::size_t c, std::size_t m, std::size_t p) {
                     const bool fwd = v[c] >= 0.0;
                     const double d = fwd ? (f[c] - f[m]) * inv_h : (f[p] - f[c]) * inv_h;
                     gv[c] += g[c] * d;
                     const double w = g[c] * v[c] * inv_h;
                     if (fwd) {
                       gf[c] += w;
                       gf[m] -= w;
                     } else {
                       gf[p] += w;
                       gf[c] -= w;
                     }
                   });
                 });
}

/// Overwrites every entry on the outer spatial boundary with values[channel].
inline Var set_boundary(Var x, std::vector<double> values) {
  const Shape s = x.shape();
  require(s.size() == 2 || s.size() == 3, ErrorCode::ShapeMismatch,
          "set_boundary expects [C,N] or [C,Ny,Nx], got " + shape_str(s));
  require(values.size() == s[0], ErrorCode::ShapeMismatch, "one boundary value per channel");
  const std::size_t ny = s.size() == 3 ? s[1] : 1;
  const std::size_t nx = s.back();
  auto on_edge = [ny, nx, rank = s.size()](std::size_t j, std::size_t i) {
    if (rank == 2) return i == 0 || i == nx - 1;
    return i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
  };
  Tensor out = x.value();
  for (std::size_t c = 0; c < s[0]; ++c) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        if (on_edge(j, i)) out[(c * ny + j) * nx + i] = values[c];
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape().push(Primitive::SetBoundary, {ix}, std::move(out),
                       [ix, s, ny, nx, on_edge](const Tensor& g, GradSlots& grads) {
                         auto& gx = grad_slot(grads, ix, s);
                         for (std::size_t c = 0; c < s[0]; ++c) {
                           for (std::size_t j = 0; j < ny; ++j) {
                             for (std::size_t i = 0; i < nx; ++i) {
                               const std::size_t k = (c * ny + j) * nx + i;
                               if (!on_edge(j, i)) gx[k] += g[k];
                             }
                           }
                         }
                       });
}

// ---------------------------------------------------------------------------
// Right-hand sides
// ---------------------------------------------------------------------------

namespace detail {

inline void check_field(Var u, const PdeSpec& s) {
  require(u.shape() == s.field_shape(), ErrorCode::ShapeMismatch,
          "field " + shape_str(u.shape()) + " but spec expects " + shape_str(s.field_shape()));
}

/// Adds the present terms in order; an equation without terms is identically 0.
inline Var sum_terms(Tape& tape, const Shape& shape, std::initializer_list<std::optional<Var>> terms) {
  std::optional<Var> acc;
  for (const auto& t : terms) {
    if (!t) continue;
    acc = acc ? add(*acc, *t) : *t;
  }
  return acc ? *acc : tape.leaf(Tensor(shape, 0.0));
}

inline Var first_derivative(Var u, int axis, double h, BcKind bc) {
  return stencil(u, axis, central_first_derivative(h), bc);
}

inline Var second_derivative(Var u, int axis, double h, BcKind bc) {
  return stencil(u, axis, central_second_derivative(h), bc);
}

inline Var rhs_1d(Var u, const PdeSpec& s) {
  const double h = s.dx();
  std::optional<Var> adv, diff, react;
  if (s.terms.contains(Term::advection)) {
    adv = s.advection == AdvectionScheme::central
              ? scale(mul(u, first_derivative(u, 1, h, s.bc)), -1.0)
              : scale(upwind(u, u, 1, h, s.bc), -1.0);
  }
  if (s.terms.contains(Term::diffusion)) {
    diff = scale(second_derivative(u, 1, h, s.bc), s.diffusivity);
  }
  if (s.terms.contains(Term::reaction)) {
    if (s.benchmark == Benchmark::nagumo) {
      // u (1 - u) (u - alpha)
      react = mul(mul(u, shift(scale(u, -1.0), 1.0)), shift(u, -s.alpha_speed));
    } else {
      // 5u - 5u^3
      react = sub(scale(u, 5.0), scale(mul(mul(u, u), u), 5.0));
    }
  }
  return sum_terms(u.tape(), u.shape(), {adv, diff, react});
}

inline Var rhs_2d(Var u, const PdeSpec& s) {
  const double hx = s.dx(), hy = s.dy();
  Var u1 = slice_channels(u, 0, 1);
  Var u2 = slice_channels(u, 1, 1);
  auto advect = [&](Var comp) {
    if (s.advection == AdvectionScheme::central) {
      return scale(add(mul(u1, first_derivative(comp, 1, hx, s.bc)),
                       mul(u2, first_derivative(comp, 2, hy, s.bc))),
                   -1.0);
    }
    return scale(add(upwind(u1, comp, 1, hx, s.bc), upwind(u2, comp, 2, hy, s.bc)), -1.0);
  };
  auto diffuse = [&](Var comp) {
    return scale(add(second_derivative(comp, 1, hx, s.bc), second_derivative(comp, 2, hy, s.bc)),
                 s.diffusivity);
  };
  const bool adv = s.terms.contains(Term::advection);
  std::optional<Var> a1, a2, d1, d2;
  if (adv) {
    a1 = advect(u1);
    a2 = advect(u2);
  }
  if (s.terms.contains(Term::diffusion_x)) d1 = diffuse(u1);
  if (s.terms.contains(Term::diffusion_y)) d2 = diffuse(u2);
  const Shape comp_shape = u1.shape();
  Var r1 = sum_terms(u.tape(), comp_shape, {a1, d1});
  Var r2 = sum_terms(u.tape(), comp_shape, {a2, d2});
  return concat_channels({r1, r2});
}

}  // namespace detail

/// Sum of the active terms of the PdeSpec evaluated at u.
inline Var rhs(Var u, const PdeSpec& s) {
  detail::check_field(u, s);
  require(s.terms.subset_of(full_terms(s.benchmark)), ErrorCode::UnsupportedTermForBenchmark,
          "terms {" + s.terms.str() + "} not all valid for " + to_string(s.benchmark));
  return s.is_2d() ? detail::rhs_2d(u, s) : detail::rhs_1d(u, s);
}

inline Var apply_bc(Var u, const PdeSpec& s) {
  if (s.bc == BcKind::periodic) return u;
  return set_boundary(u, std::vector<double>(s.channels(), s.bc_value));
}

/// Magnitude above which a state counts as blown up.
inline constexpr double kBlowUpThreshold = 1e8;

/// bc(u + dt * (rhs(u) + correction)).
inline Var euler_step(Var u, const PdeSpec& s, std::optional<Var> correction = std::nullopt) {
  detail::check_field(u, s);
  if (correction) {
    require(correction->shape() == u.shape(), ErrorCode::ShapeMismatch,
            "correction " + shape_str(correction->shape()) + " vs state " + shape_str(u.shape()));
  }
  try {
    Var r = rhs(u, s);
    if (correction) r = add(r, *correction);
    Var next = apply_bc(add(u, scale(r, s.dt)), s);
    if (next.value().max_abs() > kBlowUpThreshold) {
      fail(ErrorCode::NonFiniteState, "state magnitude exceeded " +
                                          std::to_string(kBlowUpThreshold));
    }
    return next;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteValue) fail(ErrorCode::NonFiniteState, e.what());
    throw;
  }
}

// ---------------------------------------------------------------------------
// Plain-value wrappers
// ---------------------------------------------------------------------------

inline GridField rhs(const GridField& u, const PdeSpec& s) {
  Tape tape;
  tape.set_grad_enabled(false);
  return {rhs(tape.leaf(u.values), s).value(), u.time_index};
}

inline GridField apply_bc(const GridField& u, const PdeSpec& s) {
  Tape tape;
  tape.set_grad_enabled(false);
  return {apply_bc(tape.leaf(u.values), s).value(), u.time_index};
}

inline GridField euler_step(const GridField& u, const PdeSpec& s,
                            const std::optional<GridField>& correction = std::nullopt) {
  Tape tape;
  tape.set_grad_enabled(false);
  std::optional<Var> c;
  if (correction) c = tape.leaf(correction->values);
  return {euler_step(tape.leaf(u.values), s, c).value(), u.time_index + 1};
}

/// The missing-physics field a perfect correction would supply: rhs of the
/// terms in `full` but not in `partial`.
inline GridField oracle_correction(const GridField& u, const PdeSpec& full, TermSet partial) {
  return rhs(u, full.with_terms(full.terms.minus(partial)));
}

}  // namespace dpawno
