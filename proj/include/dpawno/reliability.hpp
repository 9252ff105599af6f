#pragma once

// Monte Carlo reliability: GRF initial conditions, rollouts through a
// surrogate (or the reference solver), and the limit state
//   J = g_t - max_x |u(x, t)|,  failure <=> min_t J < 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpawno/datagen.hpp"
#include "dpawno/error.hpp"
#include "dpawno/grf.hpp"
#include "dpawno/parallel.hpp"
#include "dpawno/training.hpp"

namespace dpawno {

struct LimitState {
  double threshold = 9.0;  // g_t
  bool magnitude = true;   // max |u| rather than max u
};

/// min over stored steps (including the initial state) of g_t - max over the field.
inline double evaluate_margin(const std::vector<Tensor>& trajectory, const LimitState& ls) {
  require(!trajectory.empty(), ErrorCode::InvalidArgument, "empty trajectory");
  require(std::isfinite(ls.threshold), ErrorCode::InvalidArgument, "threshold must be finite");
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& u : trajectory) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double v : u.data()) peak = std::max(peak, ls.magnitude ? std::abs(v) : v);
    margin = std::min(margin, ls.threshold - peak);
  }
  return margin;
}

struct ReliabilityOptions {
  std::size_t horizon = 100;  // rollout steps scanned for failure
  bool diverged_is_failure = true;
  std::size_t workers = 1;
};

struct ReliabilityReport {
  std::size_t n_samples = 0;
  std::size_t failures = 0;
  std::size_t diverged = 0;
  double failure_probability = 0.0;
  double reliability = 1.0;
  double standard_error = 0.0;
  std::vector<double> margins;  // -inf for diverged samples
};

inline ReliabilityReport summarize(const std::vector<double>& margins, bool diverged_is_failure) {
  ReliabilityReport r;
  r.n_samples = margins.size();
  r.margins = margins;
  for (double m : margins) {
    const bool div = std::isinf(m) && m < 0.0;
    if (div) ++r.diverged;
    if (m < 0.0 && (!div || diverged_is_failure)) ++r.failures;
  }
  const double n = static_cast<double>(r.n_samples);
  r.failure_probability = static_cast<double>(r.failures) / n;
  r.reliability = 1.0 - r.failure_probability;
  r.standard_error = std::sqrt(r.failure_probability * (1.0 - r.failure_probability) / n);
  return r;
}

/// The GRF family used for reliability initial conditions.
inline IcFamily grf_family(const GrfSpec& g) {
  IcFamily f;
  f.kind = IcKind::grf;
  f.grf = g;
  return f;
}

inline ReliabilityReport estimate_reliability(const Surrogate& model, const GrfSpec& grf,
                                              const LimitState& ls, std::size_t n, std::uint64_t seed,
                                              const ReliabilityOptions& opt = {}) {
  require(n >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  validate(grf);
  require(std::isfinite(ls.threshold), ErrorCode::InvalidArgument, "threshold must be finite");
  const auto ics = sample_ics(grf_family(grf), n, model.spec, seed);
  const auto margins = parallel_map<double>(n, opt.workers, [&](std::size_t i) {
    try {
      return evaluate_margin(model.rollout(ics[i].values, opt.horizon), ls);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteState) throw;
      return -std::numeric_limits<double>::infinity();
    }
  });
  return summarize(margins, opt.diverged_is_failure);
}

}  // namespace dpawno
