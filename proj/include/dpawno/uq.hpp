#pragma once

// Response densities at a probe point and their comparison: Gaussian KDE on a
// uniform grid, Hellinger distance between bin masses, ensemble MSE.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dpawno/error.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

/// Bin masses on a uniform support grid; sum(mass) == 1.
struct Density {
  std::vector<double> support;
  std::vector<double> mass;
  double bandwidth = 0.0;
  bool degenerate = false;  // all samples equal: a single unit-mass bin

  double lo() const { return support.front(); }
  double hi() const { return support.back(); }
};

inline constexpr std::size_t kDefaultPdfPoints = 256;

namespace detail {

inline void normalize(std::vector<double>& mass) {
  double total = 0.0;
  for (double m : mass) total += m;
  require(total > 0.0 && std::isfinite(total), ErrorCode::DegenerateSamples, "density has no mass");
  for (double& m : mass) m /= total;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + static_cast<double>(i) * h;
  g.back() = hi;
  return g;
}

}  // namespace detail

/// Silverman bandwidth 1.06 sigma n^(-1/5), floored at 1e-6 * range.
inline double silverman_bandwidth(const std::vector<double>& samples) {
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= (n - 1.0);
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  return std::max(1.06 * std::sqrt(var) * std::pow(n, -0.2), 1e-6 * (*mx - *mn));
}

/// Gaussian KDE on grid_points values spanning [min - 3h, max + 3h].
inline Density estimate_pdf(const std::vector<double>& samples, std::size_t grid_points = kDefaultPdfPoints) {
  require(samples.size() >= 2, ErrorCode::DegenerateSamples, "need at least 2 samples");
  require(grid_points >= 2, ErrorCode::InvalidArgument, "need at least 2 grid points");
  for (double v : samples) require(std::isfinite(v), ErrorCode::NonFiniteValue, "non-finite sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  require(*mx > *mn, ErrorCode::DegenerateSamples, "all samples equal " + std::to_string(*mn));
  Density d;
  d.bandwidth = silverman_bandwidth(samples);
  const double h = d.bandwidth;
  d.support = detail::linspace(*mn - 3.0 * h, *mx + 3.0 * h, grid_points);
  d.mass.assign(grid_points, 0.0);
  for (std::size_t g = 0; g < grid_points; ++g) {
    double s = 0.0;
    for (double v : samples) {
      const double z = (d.support[g] - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    d.mass[g] = s;
  }
  detail::normalize(d.mass);
  return d;
}

/// As estimate_pdf, but equal samples yield a flagged unit mass at their value.
inline Density estimate_pdf_or_delta(const std::vector<double>& samples,
                                     std::size_t grid_points = kDefaultPdfPoints) {
  try {
    return estimate_pdf(samples, grid_points);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateSamples || samples.empty()) throw;
    Density d;
    d.support = {samples[0]};
    d.mass = {1.0};
    d.degenerate = true;
    return d;
  }
}

/// Density from pointwise values of a pdf on a uniform grid (used as a quadrature reference).
inline Density density_from_values(std::vector<double> support, std::vector<double> values) {
  require(support.size() == values.size() && !support.empty(), ErrorCode::ShapeMismatch,
          "support and values differ in length");
  Density d{std::move(support), std::move(values)};
  for (double m : d.mass) require(m >= 0.0, ErrorCode::InvalidArgument, "negative density value");
  detail::normalize(d.mass);
  return d;
}

/// Re-bins onto `grid` by linear interpolation of mass per unit length, zero
/// outside the original support, then renormalizes.
inline std::vector<double> rebin(const Density& d, const std::vector<double>& grid) {
  std::vector<double> out(grid.size(), 0.0);
  if (d.support.size() == 1) {
    // A point mass goes to the nearest bin.
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (std::abs(grid[i] - d.support[0]) < std::abs(grid[best] - d.support[0])) best = i;
    }
    out[best] = 1.0;
    return out;
  }
  const double lo = d.lo(), hi = d.hi();
  const double h = (hi - lo) / static_cast<double>(d.support.size() - 1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (x < lo || x > hi) continue;
    const double pos = (x - lo) / h;
    const auto k = std::min(static_cast<std::size_t>(pos), d.support.size() - 2);
    const double f = pos - static_cast<double>(k);
    out[i] = std::max(0.0, (1.0 - f) * d.mass[k] + f * d.mass[k + 1]);
  }
  double total = 0.0;
  for (double m : out) total += m;
  if (total > 0.0) {
    for (double& m : out) m /= total;
  } else {
    // Support narrower than one bin of the new grid: collapse to the nearest bin.
    return rebin(Density{{0.5 * (lo + hi)}, {1.0}}, grid);
  }
  return out;
}

/// Common support for comparing densities: union span, the larger bin count.
inline std::vector<double> common_support(const std::vector<const Density*>& ds,
                                          std::size_t min_points = 2) {
  double lo = ds.front()->lo(), hi = ds.front()->hi();
  std::size_t n = min_points;
  for (const Density* d : ds) {
    lo = std::min(lo, d->lo());
    hi = std::max(hi, d->hi());
    n = std::max(n, d->support.size());
  }
  if (hi <= lo) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  return detail::linspace(lo, hi, n);
}

/// H = (1/sqrt 2) || sqrt(p) - sqrt(q) ||_2 after re-binning both to a common grid.
inline double hellinger(const Density& p, const Density& q, std::size_t points = 0) {
  auto grid = common_support({&p, &q});
  if (points > 0) grid = detail::linspace(grid.front(), grid.back(), points);
  const auto a = rebin(p, grid);
  const auto b = rebin(q, grid);
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = std::sqrt(a[i]) - std::sqrt(b[i]);
    s += d * d;
  }
  return std::clamp(std::sqrt(0.5 * s), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

using Trajectories = std::vector<std::vector<Tensor>>;

/// Mean squared error over samples x steps 1..max_steps x grid values.
inline double ensemble_mse(const Trajectories& pred, const Trajectories& truth,
                           std::size_t max_steps = 100) {
  require(pred.size() == truth.size() && !pred.empty(), ErrorCode::ShapeMismatch,
          "ensembles differ in size");
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i].size() == truth[i].size(), ErrorCode::ShapeMismatch,
            "trajectory " + std::to_string(i) + " differs in length");
    const std::size_t steps = std::min(max_steps, pred[i].size() - 1);
    for (std::size_t t = 1; t <= steps; ++t) {
      require(pred[i][t].shape() == truth[i][t].shape(), ErrorCode::ShapeMismatch,
              "state shapes differ");
      for (std::size_t k = 0; k < pred[i][t].size(); ++k) {
        const double e = pred[i][t][k] - truth[i][t][k];
        s += e * e;
      }
      count += pred[i][t].size();
    }
  }
  require(count > 0, ErrorCode::ShapeMismatch, "no steps to compare");
  return s / static_cast<double>(count);
}

/// A fixed grid location: flat index into the state tensor (channel 0).
struct Probe {
  double x = 0.0;
  double y = 0.0;
  std::size_t index = 0;
  double grid_x = 0.0;
  double grid_y = 0.0;
};

/// Nearest grid point to (x, y) on channel 0.
inline Probe make_probe(const PdeSpec& s, double x, double y = 0.0) {
  Probe p{x, y};
  const std::size_t i = nearest_index(x, s.x_min, s.dx(), s.nx);
  p.grid_x = s.x_min + static_cast<double>(i) * s.dx();
  if (s.is_2d()) {
    const std::size_t j = nearest_index(y, s.y_min, s.dy(), s.ny);
    p.grid_y = s.y_min + static_cast<double>(j) * s.dy();
    p.index = j * s.nx + i;
  } else {
    p.index = i;
  }
  return p;
}

/// u(probe, step) for every trajectory.
inline std::vector<double> probe_values(const Trajectories& trajs, const Probe& p, std::size_t step) {
  std::vector<double> out;
  out.reserve(trajs.size());
  for (const auto& tr : trajs) {
    require(step < tr.size(), ErrorCode::InvalidArgument,
            "probe step " + std::to_string(step) + " beyond rollout of " + std::to_string(tr.size() - 1));
    out.push_back(tr[step][p.index]);
  }
  return out;
}

/// Mean over steps 1..max_steps of the Hellinger distance between the probe PDFs.
inline double mean_hellinger(const Trajectories& pred, const Trajectories& truth, const Probe& p,
                             std::size_t max_steps = 100, std::size_t grid_points = kDefaultPdfPoints) {
  require(!pred.empty() && !truth.empty(), ErrorCode::ShapeMismatch, "empty ensemble");
  const std::size_t steps = std::min({max_steps, pred[0].size() - 1, truth[0].size() - 1});
  require(steps > 0, ErrorCode::ShapeMismatch, "no steps to compare");
  double s = 0.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    s += hellinger(estimate_pdf_or_delta(probe_values(pred, p, t), grid_points),
                   estimate_pdf_or_delta(probe_values(truth, p, t), grid_points));
  }
  return s / static_cast<double>(steps);
}

}  // namespace dpawno
