#pragma once

// Multilevel orthonormal Daubechies DWT along one or two trailing axes.
//
// Every transform is written as four loops over the same index map:
// analysis, its adjoint, synthesis, and the adjoint of synthesis. With the
// periodic extension the analysis adjoint and the synthesis coincide, so the
// transform is orthonormal and idwt(dwt(x)) == x. The symmetric extension
// follows the half-sample reflection convention and produces
// floor((n + L - 1) / 2) coefficients per band.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpawno/autodiff.hpp"
#include "dpawno/error.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

enum class WaveletFamily { db2, db4, db6 };
enum class Extension { periodic, symmetric };
enum class Band { approx, detail };

struct WaveletSpec {
  WaveletFamily family = WaveletFamily::db6;
  int levels = 4;
  Extension extension = Extension::periodic;
};

inline std::string to_string(WaveletFamily f) {
  switch (f) {
    case WaveletFamily::db2: return "db2";
    case WaveletFamily::db4: return "db4";
    case WaveletFamily::db6: return "db6";
  }
  return "?";
}

inline WaveletFamily parse_wavelet_family(const std::string& s) {
  if (s == "db2") return WaveletFamily::db2;
  if (s == "db4") return WaveletFamily::db4;
  if (s == "db6") return WaveletFamily::db6;
  fail(ErrorCode::InvalidArgument, "unknown wavelet family '" + s + "'");
}

inline std::string to_string(Extension e) {
  return e == Extension::periodic ? "periodic" : "symmetric";
}

inline Extension parse_extension(const std::string& s) {
  if (s == "periodic") return Extension::periodic;
  if (s == "symmetric") return Extension::symmetric;
  fail(ErrorCode::InvalidArgument, "unknown extension '" + s + "'");
}

/// Reconstruction filter pair; analysis correlates with the same taps.
struct FilterBank {
  std::vector<double> lo;
  std::vector<double> hi;
  std::size_t length() const noexcept { return lo.size(); }
};

namespace detail {

// Daubechies orthonormal scaling (decomposition low-pass) filters with
// 2, 4 and 6 vanishing moments, from Daubechies, "Ten Lectures on
// Wavelets" (1992); digits as tabulated by PyWavelets 1.x.
inline constexpr std::array<double, 4> kDb2DecLo = {
    -0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416};

inline constexpr std::array<double, 8> kDb4DecLo = {
    -0.010597401785069032, 0.0328830116668852,  0.030841381835560764, -0.18703481171909309,
    -0.027983769416859854, 0.6308807679298589,  0.7148465705529157,   0.2303778133088965};

inline constexpr std::array<double, 12> kDb6DecLo = {
    -0.0010773010853084796, 0.004777257510945511, 0.0005538422011614961, -0.03158203931748603,
    0.027522865530305727,   0.09750160558732304,  -0.12976686756726194,  -0.22626469396543983,
    0.31525035170919763,    0.7511339080210954,   0.49462389039845306,   0.11154074335010947};

template <std::size_t N>
FilterBank make_bank(const std::array<double, N>& dec_lo) {
  FilterBank fb;
  fb.lo.assign(dec_lo.rbegin(), dec_lo.rend());
  fb.hi.resize(N);
  for (std::size_t j = 0; j < N; ++j) fb.hi[j] = (j % 2 == 0 ? 1.0 : -1.0) * fb.lo[N - 1 - j];
  return fb;
}

}  // namespace detail

inline const FilterBank& filter_bank(WaveletFamily f) {
  static const FilterBank db2 = detail::make_bank(detail::kDb2DecLo);
  static const FilterBank db4 = detail::make_bank(detail::kDb4DecLo);
  static const FilterBank db6 = detail::make_bank(detail::kDb6DecLo);
  switch (f) {
    case WaveletFamily::db2: return db2;
    case WaveletFamily::db4: return db4;
    case WaveletFamily::db6: return db6;
  }
  return db6;
}

/// Number of coefficients per band for a level whose input has n samples.
inline std::size_t band_length(std::size_t n, std::size_t filter_len, Extension ext) {
  return ext == Extension::periodic ? n / 2 : (n + filter_len - 1) / 2;
}

// ---------------------------------------------------------------------------
// Line kernels. A tensor is viewed as [outer, n, inner] around the axis.
// ---------------------------------------------------------------------------

namespace detail {

struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 0;
  std::size_t inner = 1;
};

/// axis_from_end: 1 = last axis, 2 = second to last.
inline AxisView axis_view(const Shape& s, int axis_from_end) {
  require(axis_from_end >= 1 && static_cast<std::size_t>(axis_from_end) <= s.size(),
          ErrorCode::ShapeMismatch, "axis out of range for " + shape_str(s));
  const std::size_t a = s.size() - static_cast<std::size_t>(axis_from_end);
  AxisView v;
  for (std::size_t i = 0; i < a; ++i) v.outer *= s[i];
  v.n = s[a];
  for (std::size_t i = a + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

inline Shape with_axis(Shape s, int axis_from_end, std::size_t n) {
  s[s.size() - static_cast<std::size_t>(axis_from_end)] = n;
  return s;
}

inline std::ptrdiff_t reflect(std::ptrdiff_t idx, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  std::ptrdiff_t r = idx % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

inline std::ptrdiff_t wrap(std::ptrdiff_t idx, std::ptrdiff_t n) {
  std::ptrdiff_t r = idx % n;
  return r < 0 ? r + n : r;
}

inline std::ptrdiff_t offset_for(Extension ext, std::size_t filter_len) {
  // Periodic alignment matches the PyWavelets "periodization" mode.
  const auto L = static_cast<std::ptrdiff_t>(filter_len);
  return ext == Extension::periodic ? 1 - L / 2 : 2 - L;
}

/// c[k] = sum_j f[j] x[ext(2k + j + off)]
inline void analysis(std::span<const double> x, std::size_t n, std::span<double> c, std::size_t m,
                     std::span<const double> f, Extension ext, AxisView in, std::size_t c_inner) {
  const auto L = static_cast<std::ptrdiff_t>(f.size());
  const auto off = offset_for(ext, f.size());
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t o = 0; o < in.outer; ++o) {
    const double* xb = x.data() + o * n * in.inner;
    double* cb = c.data() + o * m * c_inner;
    for (std::size_t k = 0; k < m; ++k) {
      double* ck = cb + k * c_inner;
      for (std::ptrdiff_t j = 0; j < L; ++j) {
        const std::ptrdiff_t raw = 2 * static_cast<std::ptrdiff_t>(k) + j + off;
        const std::ptrdiff_t idx = ext == Extension::periodic ? wrap(raw, sn) : reflect(raw, sn);
        const double fj = f[static_cast<std::size_t>(j)];
        const double* xi = xb + static_cast<std::size_t>(idx) * in.inner;
        for (std::size_t q = 0; q < in.inner; ++q) ck[q] += fj * xi[q];
      }
    }
  }
}

/// Transpose of analysis: x[ext(2k + j + off)] += f[j] c[k]
inline void analysis_adjoint(std::span<const double> c, std::size_t m, std::span<double> x,
                             std::size_t n, std::span<const double> f, Extension ext,
                             AxisView xv, std::size_t c_inner) {
  const auto L = static_cast<std::ptrdiff_t>(f.size());
  const auto off = offset_for(ext, f.size());
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t o = 0; o < xv.outer; ++o) {
    double* xb = x.data() + o * n * xv.inner;
    const double* cb = c.data() + o * m * c_inner;
    for (std::size_t k = 0; k < m; ++k) {
      const double* ck = cb + k * c_inner;
      for (std::ptrdiff_t j = 0; j < L; ++j) {
        const std::ptrdiff_t raw = 2 * static_cast<std::ptrdiff_t>(k) + j + off;
        const std::ptrdiff_t idx = ext == Extension::periodic ? wrap(raw, sn) : reflect(raw, sn);
        const double fj = f[static_cast<std::size_t>(j)];
        double* xi = xb + static_cast<std::size_t>(idx) * xv.inner;
        for (std::size_t q = 0; q < xv.inner; ++q) xi[q] += fj * ck[q];
      }
    }
  }
}

/// x[2k + j + off] += f[j] c[k]; periodic wraps, symmetric drops samples outside [0, n).
inline void synthesis(std::span<const double> c, std::size_t m, std::span<double> x, std::size_t n,
                      std::span<const double> f, Extension ext, AxisView xv, std::size_t c_inner) {
  if (ext == Extension::periodic) {
    analysis_adjoint(c, m, x, n, f, ext, xv, c_inner);
    return;
  }
  const auto L = static_cast<std::ptrdiff_t>(f.size());
  const auto off = offset_for(ext, f.size());
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t o = 0; o < xv.outer; ++o) {
    double* xb = x.data() + o * n * xv.inner;
    const double* cb = c.data() + o * m * c_inner;
    for (std::size_t k = 0; k < m; ++k) {
      const double* ck = cb + k * c_inner;
      for (std::ptrdiff_t j = 0; j < L; ++j) {
        const std::ptrdiff_t idx = 2 * static_cast<std::ptrdiff_t>(k) + j + off;
        if (idx < 0 || idx >= sn) continue;
        const double fj = f[static_cast<std::size_t>(j)];
        double* xi = xb + static_cast<std::size_t>(idx) * xv.inner;
        for (std::size_t q = 0; q < xv.inner; ++q) xi[q] += fj * ck[q];
      }
    }
  }
}

/// Transpose of synthesis: c[k] += sum_j f[j] x[2k + j + off]
inline void synthesis_adjoint(std::span<const double> x, std::size_t n, std::span<double> c,
                              std::size_t m, std::span<const double> f, Extension ext, AxisView xv,
                              std::size_t c_inner) {
  if (ext == Extension::periodic) {
    analysis(x, n, c, m, f, ext, xv, c_inner);
    return;
  }
  const auto L = static_cast<std::ptrdiff_t>(f.size());
  const auto off = offset_for(ext, f.size());
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t o = 0; o < xv.outer; ++o) {
    const double* xb = x.data() + o * n * xv.inner;
    double* cb = c.data() + o * m * c_inner;
    for (std::size_t k = 0; k < m; ++k) {
      double* ck = cb + k * c_inner;
      for (std::ptrdiff_t j = 0; j < L; ++j) {
        const std::ptrdiff_t idx = 2 * static_cast<std::ptrdiff_t>(k) + j + off;
        if (idx < 0 || idx >= sn) continue;
        const double fj = f[static_cast<std::size_t>(j)];
        const double* xi = xb + static_cast<std::size_t>(idx) * xv.inner;
        for (std::size_t q = 0; q < xv.inner; ++q) ck[q] += fj * xi[q];
      }
    }
  }
}

inline void check_level_input(std::size_t n, Extension ext) {
  require(n >= 2, ErrorCode::SignalTooShort, "level input of length " + std::to_string(n));
  if (ext == Extension::periodic) {
    require(n % 2 == 0, ErrorCode::SignalTooShort,
            "periodic level input must have even length, got " + std::to_string(n));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable single-level ops
// ---------------------------------------------------------------------------

/// One analysis level along an axis (1 = last, 2 = second to last).
inline Var dwt_level(Var x, const FilterBank& fb, Extension ext, int axis_from_end, Band band) {
  const Shape xs = x.shape();
  const auto xv = detail::axis_view(xs, axis_from_end);
  detail::check_level_input(xv.n, ext);
  const std::size_t m = band_length(xv.n, fb.length(), ext);
  const Shape out_shape = detail::with_axis(xs, axis_from_end, m);
  std::vector<double> f = band == Band::approx ? fb.lo : fb.hi;
  Tensor out(out_shape);
  detail::analysis(x.value().data(), xv.n, out.data(), m, f, ext, xv, xv.inner);
  const std::size_t ix = x.id();
  return x.tape().push(Primitive::DwtLevel, {ix}, std::move(out),
                       [ix, xs, xv, m, f = std::move(f), ext](const Tensor& g, GradSlots& grads) {
                         auto& gx = grad_slot(grads, ix, xs);
                         detail::analysis_adjoint(g.data(), m, gx.data(), xv.n, f, ext, xv,
                                                  xv.inner);
                       });
}

/// One synthesis level: rebuilds an axis of length n_out from an (approx, detail) pair.
inline Var idwt_level(Var a, Var d, const FilterBank& fb, Extension ext, int axis_from_end,
                      std::size_t n_out) {
  require(&a.tape() == &d.tape(), ErrorCode::InvalidArgument, "operands on different tapes");
  require(a.shape() == d.shape(), ErrorCode::InconsistentCoeffLengths,
          "approx " + shape_str(a.shape()) + " vs detail " + shape_str(d.shape()));
  const Shape cs = a.shape();
  const auto cv = detail::axis_view(cs, axis_from_end);
  detail::check_level_input(n_out, ext);
  require(band_length(n_out, fb.length(), ext) == cv.n, ErrorCode::InconsistentCoeffLengths,
          std::to_string(cv.n) + " coefficients cannot rebuild length " + std::to_string(n_out));
  const Shape out_shape = detail::with_axis(cs, axis_from_end, n_out);
  const auto xv = detail::axis_view(out_shape, axis_from_end);
  const std::size_t m = cv.n;
  Tensor out(out_shape);
  detail::synthesis(a.value().data(), m, out.data(), n_out, fb.lo, ext, xv, xv.inner);
  detail::synthesis(d.value().data(), m, out.data(), n_out, fb.hi, ext, xv, xv.inner);
  const std::size_t ia = a.id(), id = d.id();
  return a.tape().push(Primitive::IdwtLevel, {ia, id}, std::move(out),
                       [ia, id, cs, xv, m, n_out, fb, ext](const Tensor& g, GradSlots& grads) {
                         auto& ga = grad_slot(grads, ia, cs);
                         detail::synthesis_adjoint(g.data(), n_out, ga.data(), m, fb.lo, ext, xv,
                                                   xv.inner);
                         auto& gd = grad_slot(grads, id, cs);
                         detail::synthesis_adjoint(g.data(), n_out, gd.data(), m, fb.hi, ext, xv,
                                                   xv.inner);
                       });
}

// ---------------------------------------------------------------------------
// Multilevel transforms on the tape
// ---------------------------------------------------------------------------

/// Coefficients of a 1D multilevel transform; details[0] is the coarsest level.
struct VarCoeffs {
  Var approx;
  std::vector<Var> details;
  std::vector<std::size_t> lengths;  // lengths[k]: input length of the k-th coarsest level
};

/// 2D coefficients; each detail level holds (x-low/y-high, x-high/y-low, x-high/y-high).
struct VarCoeffs2D {
  Var approx;
  std::vector<std::array<Var, 3>> details;
  std::vector<std::pair<std::size_t, std::size_t>> lengths;  // (ny, nx) per level, coarsest first
};

inline void validate_levels(std::size_t n, const WaveletSpec& spec) {
  require(spec.levels >= 1, ErrorCode::InvalidArgument, "levels must be >= 1");
  const std::size_t L = filter_bank(spec.family).length();
  std::size_t len = n;
  for (int l = 0; l < spec.levels; ++l) {
    require(len >= 2 && (spec.extension != Extension::periodic || len % 2 == 0),
            ErrorCode::SignalTooShort,
            "length " + std::to_string(n) + " does not support " + std::to_string(spec.levels) +
                " " + to_string(spec.extension) + " levels");
    len = band_length(len, L, spec.extension);
  }
}

inline VarCoeffs dwt_multilevel(Var x, const WaveletSpec& spec) {
  const std::size_t n = x.shape().back();
  validate_levels(n, spec);
  const auto& fb = filter_bank(spec.family);
  VarCoeffs out;
  Var cur = x;
  std::vector<Var> details;
  std::vector<std::size_t> lengths;
  for (int l = 0; l < spec.levels; ++l) {
    lengths.push_back(cur.shape().back());
    details.push_back(dwt_level(cur, fb, spec.extension, 1, Band::detail));
    cur = dwt_level(cur, fb, spec.extension, 1, Band::approx);
  }
  out.approx = cur;
  out.details.assign(details.rbegin(), details.rend());
  out.lengths.assign(lengths.rbegin(), lengths.rend());
  return out;
}

inline Var idwt_multilevel(const VarCoeffs& c, const WaveletSpec& spec) {
  require(c.details.size() == c.lengths.size() && !c.details.empty(),
          ErrorCode::InconsistentCoeffLengths, "detail/length count mismatch");
  const auto& fb = filter_bank(spec.family);
  Var cur = c.approx;
  for (std::size_t l = 0; l < c.details.size(); ++l) {
    cur = idwt_level(cur, c.details[l], fb, spec.extension, 1, c.lengths[l]);
  }
  return cur;
}

inline VarCoeffs2D dwt2d_multilevel(Var x, const WaveletSpec& spec) {
  const Shape& s = x.shape();
  require(s.size() >= 2, ErrorCode::ShapeMismatch, "2D transform needs rank >= 2");
  validate_levels(s[s.size() - 1], spec);
  validate_levels(s[s.size() - 2], spec);
  const auto& fb = filter_bank(spec.family);
  const auto ext = spec.extension;
  std::vector<std::array<Var, 3>> details;
  std::vector<std::pair<std::size_t, std::size_t>> lengths;
  Var cur = x;
  for (int l = 0; l < spec.levels; ++l) {
    const Shape& cs = cur.shape();
    lengths.emplace_back(cs[cs.size() - 2], cs[cs.size() - 1]);
    Var lo = dwt_level(cur, fb, ext, 1, Band::approx);
    Var hi = dwt_level(cur, fb, ext, 1, Band::detail);
    Var ll = dwt_level(lo, fb, ext, 2, Band::approx);
    Var lh = dwt_level(lo, fb, ext, 2, Band::detail);
    Var hl = dwt_level(hi, fb, ext, 2, Band::approx);
    Var hh = dwt_level(hi, fb, ext, 2, Band::detail);
    details.push_back({lh, hl, hh});
    cur = ll;
  }
  VarCoeffs2D out;
  out.approx = cur;
  out.details.assign(details.rbegin(), details.rend());
  out.lengths.assign(lengths.rbegin(), lengths.rend());
  return out;
}

inline Var idwt2d_multilevel(const VarCoeffs2D& c, const WaveletSpec& spec) {
  require(c.details.size() == c.lengths.size() && !c.details.empty(),
          ErrorCode::InconsistentCoeffLengths, "detail/length count mismatch");
  const auto& fb = filter_bank(spec.family);
  const auto ext = spec.extension;
  Var cur = c.approx;
  for (std::size_t l = 0; l < c.details.size(); ++l) {
    const auto [ny, nx] = c.lengths[l];
    Var lo = idwt_level(cur, c.details[l][0], fb, ext, 2, ny);
    Var hi = idwt_level(c.details[l][1], c.details[l][2], fb, ext, 2, ny);
    cur = idwt_level(lo, hi, fb, ext, 1, nx);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Plain-value API
// ---------------------------------------------------------------------------

/// 1D coefficients; details[0] is the coarsest level, details.back() the finest.
struct WaveletCoeffs {
  Tensor approx;
  std::vector<Tensor> details;
  std::vector<std::size_t> lengths;
};

struct WaveletCoeffs2D {
  Tensor approx;
  std::vector<std::array<Tensor, 3>> details;
  std::vector<std::pair<std::size_t, std::size_t>> lengths;
};

inline WaveletCoeffs dwt_multilevel(const Tensor& signal, const WaveletSpec& spec) {
  Tape tape;
  tape.set_grad_enabled(false);
  const auto vc = dwt_multilevel(tape.leaf(signal), spec);
  WaveletCoeffs out;
  out.approx = vc.approx.value();
  for (const Var& d : vc.details) out.details.push_back(d.value());
  out.lengths = vc.lengths;
  return out;
}

inline Tensor idwt_multilevel(const WaveletCoeffs& coeffs, const WaveletSpec& spec) {
  require(coeffs.details.size() == coeffs.lengths.size(), ErrorCode::InconsistentCoeffLengths,
          "detail/length count mismatch");
  Tape tape;
  tape.set_grad_enabled(false);
  VarCoeffs vc;
  vc.approx = tape.leaf(coeffs.approx);
  for (const auto& d : coeffs.details) vc.details.push_back(tape.leaf(d));
  vc.lengths = coeffs.lengths;
  return idwt_multilevel(vc, spec).value();
}

inline WaveletCoeffs2D dwt2d_multilevel(const Tensor& field, const WaveletSpec& spec) {
  Tape tape;
  tape.set_grad_enabled(false);
  const auto vc = dwt2d_multilevel(tape.leaf(field), spec);
  WaveletCoeffs2D out;
  out.approx = vc.approx.value();
  for (const auto& lvl : vc.details) {
    out.details.push_back({lvl[0].value(), lvl[1].value(), lvl[2].value()});
  }
  out.lengths = vc.lengths;
  return out;
}

inline Tensor idwt2d_multilevel(const WaveletCoeffs2D& coeffs, const WaveletSpec& spec) {
  require(coeffs.details.size() == coeffs.lengths.size(), ErrorCode::InconsistentCoeffLengths,
          "detail/length count mismatch");
  Tape tape;
  tape.set_grad_enabled(false);
  VarCoeffs2D vc;
  vc.approx = tape.leaf(coeffs.approx);
  for (const auto& lvl : coeffs.details) {
    vc.details.push_back({tape.leaf(lvl[0]), tape.leaf(lvl[1]), tape.leaf(lvl[2])});
  }
  vc.lengths = coeffs.lengths;
  return idwt2d_multilevel(vc, spec).value();
}

/// Transpose of dwt_multilevel: maps a coefficient set back to signal space.
/// Equals idwt_multilevel for the periodic extension.
inline Tensor dwt_adjoint(const WaveletCoeffs& coeffs, const WaveletSpec& spec) {
  const auto& fb = filter_bank(spec.family);
  const auto ext = spec.extension;
  Tensor cur = coeffs.approx;
  for (std::size_t l = 0; l < coeffs.details.size(); ++l) {
    const std::size_t n = coeffs.lengths[l];
    const Shape out_shape = detail::with_axis(cur.shape(), 1, n);
    const auto xv = detail::axis_view(out_shape, 1);
    const std::size_t m = cur.shape().back();
    require(coeffs.details[l].shape() == cur.shape(), ErrorCode::InconsistentCoeffLengths,
            "detail level " + std::to_string(l) + " has shape " +
                shape_str(coeffs.details[l].shape()));
    Tensor next(out_shape);
    detail::analysis_adjoint(cur.data(), m, next.data(), n, fb.lo, ext, xv, 1);
    detail::analysis_adjoint(coeffs.details[l].data(), m, next.data(), n, fb.hi, ext, xv, 1);
    cur = std::move(next);
  }
  return cur;
}

/// Sum of squares over every band.
inline double coefficient_energy(const WaveletCoeffs& c) {
  double e = dot(c.approx, c.approx);
  for (const auto& d : c.details) e += dot(d, d);
  return e;
}

}  // namespace dpawno
