#pragma once

// Zero-mean Gaussian random fields on a benchmark grid, drawn as L z with L
// the Cholesky factor of the covariance. Separable kernels on 2D grids use
// the Kronecker structure K = Kx (x) Ky and never form the full matrix.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "dpawno/error.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

enum class GrfKernel { exp_sine_squared, rbf };

inline std::string to_string(GrfKernel k) {
  return k == GrfKernel::exp_sine_squared ? "exp_sine_squared" : "rbf";
}

inline GrfKernel parse_grf_kernel(const std::string& s) {
  if (s == "exp_sine_squared") return GrfKernel::exp_sine_squared;
  if (s == "rbf") return GrfKernel::rbf;
  fail(ErrorCode::InvalidArgument, "unknown GRF kernel '" + s + "'");
}

struct GrfSpec {
  GrfKernel kernel = GrfKernel::exp_sine_squared;
  double variance = 4.0;  // alpha
  double length = 0.5;    // l
  double period = 1.0;    // p, exp_sine_squared only
  double jitter = 1e-8;
};

inline void validate(const GrfSpec& g) {
  require(g.variance > 0.0 && std::isfinite(g.variance), ErrorCode::InvalidArgument,
          "GRF variance must be > 0");
  require(g.length > 0.0 && std::isfinite(g.length), ErrorCode::InvalidArgument,
          "GRF length scale must be > 0");
  require(g.kernel != GrfKernel::exp_sine_squared || (g.period > 0.0 && std::isfinite(g.period)),
          ErrorCode::InvalidArgument, "GRF period must be > 0");
  require(g.jitter >= 0.0, ErrorCode::InvalidArgument, "GRF jitter must be >= 0");
}

/// k(r) for Euclidean distance r.
inline double grf_kernel(const GrfSpec& g, double r) {
  if (g.kernel == GrfKernel::exp_sine_squared) {
    const double s = std::sin(std::numbers::pi * r / g.period);
    return g.variance * std::exp(-2.0 * s * s / (g.length * g.length));
  }
  return g.variance * std::exp(-r * r / (2.0 * g.length * g.length));
}

using Matrix = Eigen::MatrixXd;

/// K[i][j] = k(|x_i - x_j|) + jitter [i == j] over points given as rows of `pts`.
inline Matrix grf_covariance(const GrfSpec& g, const Matrix& pts) {
  validate(g);
  require(pts.rows() > 0, ErrorCode::InvalidArgument, "GRF grid is empty");
  const auto n = pts.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = grf_kernel(g, (pts.row(i) - pts.row(j)).norm());
      K(i, j) = v;
      K(j, i) = v;
    }
    K(i, i) += g.jitter;
  }
  return K;
}

/// Lower Cholesky factor; jitter grows x10 from GrfSpec::jitter up to 1e-4.
inline Matrix cholesky_with_jitter(Matrix K, double jitter) {
  double added = 0.0;
  double next = std::max(jitter, 1e-12);
  while (true) {
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    require(next <= 1e-4 * (1.0 + 1e-9), ErrorCode::NotPositiveDefinite,
            "covariance not positive definite after jitter " + std::to_string(added));
    K.diagonal().array() += next - added;
    added = next;
    next *= 10.0;
  }
}

/// Spatial grid points of a benchmark, one row per point in field order.
inline Matrix grid_points(const PdeSpec& s) {
  const Tensor g = grid_coordinates(s);
  const std::size_t n = s.points();
  const std::size_t d = s.spatial_dims();
  Matrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) pts(i, a) = g[a * n + i];
  }
  return pts;
}

namespace detail {

inline Matrix axis_points(double lo, double h, std::size_t n) {
  Matrix p(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) p(i, 0) = lo + static_cast<double>(i) * h;
  return p;
}

}  // namespace detail

/// Precomputed factor for repeated draws on one grid.
class GrfSampler {
 public:
  GrfSampler(const GrfSpec& g, const PdeSpec& s) : spec_(g), pde_(s) {
    validate(g);
    separable_ = s.is_2d() && g.kernel == GrfKernel::rbf;
    if (separable_) {
      // k = alpha * kx * ky; alpha goes on the draw so each factor has unit scale.
      GrfSpec unit = g;
      unit.variance = 1.0;
      lx_ = cholesky_with_jitter(grf_covariance(unit, detail::axis_points(s.x_min, s.dx(), s.nx)),
                                 g.jitter);
      ly_ = cholesky_with_jitter(grf_covariance(unit, detail::axis_points(s.y_min, s.dy(), s.ny)),
                                 g.jitter);
    } else {
      l_ = cholesky_with_jitter(grf_covariance(g, grid_points(s)), g.jitter);
    }
  }

  /// One field with all state channels drawn independently, before boundary conditions.
  Tensor draw(Rng& rng) const {
    Tensor out(pde_.field_shape());
    const std::size_t n = pde_.points();
    for (std::size_t c = 0; c < pde_.channels(); ++c) {
      Eigen::Map<Eigen::VectorXd> dst(out.data().data() + c * n, static_cast<Eigen::Index>(n));
      if (separable_) {
        Matrix z(static_cast<Eigen::Index>(pde_.ny), static_cast<Eigen::Index>(pde_.nx));
        for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = standard_normal(rng);
        // Field [ny, nx] = Ly Z Lx^T has covariance Kx (x) Ky.
        const Matrix u = std::sqrt(spec_.variance) * (ly_ * z * lx_.transpose());
        for (std::size_t j = 0; j < pde_.ny; ++j) {
          for (std::size_t i = 0; i < pde_.nx; ++i) dst[j * pde_.nx + i] = u(j, i);
        }
      } else {
        Eigen::VectorXd z(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
        dst = l_ * z;
      }
    }
    return out;
  }

 private:
  GrfSpec spec_;
  PdeSpec pde_;
  bool separable_ = false;
  Matrix l_, lx_, ly_;
};

/// Draw i uses its own stream, so results do not depend on how draws are scheduled.
inline std::vector<GridField> sample_grf(const GrfSpec& g, const PdeSpec& s, std::size_t count,
                                         std::uint64_t seed) {
  GrfSampler sampler(g, s);
  std::vector<GridField> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, Stream::grf, i);
    out.push_back({sampler.draw(rng), 0});
  }
  return out;
}

}  // namespace dpawno
