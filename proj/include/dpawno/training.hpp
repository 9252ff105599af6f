#pragma once

// Rollouts of the augmented stepper u' = bc(u + dt (rhs_partial(u) + WNO(u)))
// and end-to-end training with a progressively lengthened unroll.

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpawno/autodiff.hpp"
#include "dpawno/datagen.hpp"
#include "dpawno/error.hpp"
#include "dpawno/parallel.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/wno.hpp"

namespace dpawno {

// ---------------------------------------------------------------------------
// Unroll schedule
// ---------------------------------------------------------------------------

/// Piecewise-linear (epoch, T) knots; T is constant before the first and after the last.
struct UnrollSchedule {
  std::vector<std::pair<std::size_t, std::size_t>> knots{{0, 10}, {100, 10}, {400, 50}};

  void validate() const {
    require(!knots.empty(), ErrorCode::InvalidArgument, "empty unroll schedule");
    for (std::size_t i = 0; i < knots.size(); ++i) {
      require(knots[i].second >= 1, ErrorCode::InvalidArgument, "unroll length must be >= 1");
      if (i > 0) {
        require(knots[i].first > knots[i - 1].first && knots[i].second >= knots[i - 1].second,
                ErrorCode::InvalidArgument, "unroll schedule must increase in epoch and not decrease in T");
      }
    }
  }

  std::size_t at(std::size_t epoch) const {
    if (epoch <= knots.front().first) return knots.front().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
      const auto [e0, t0] = knots[i - 1];
      const auto [e1, t1] = knots[i];
      if (epoch <= e1) {
        const double f = static_cast<double>(epoch - e0) / static_cast<double>(e1 - e0);
        return t0 + static_cast<std::size_t>(std::floor(f * static_cast<double>(t1 - t0)));
      }
    }
    return knots.back().second;
  }

  std::size_t max_t() const { return knots.back().second; }

  /// "e0:T0,e1:T1,..."
  static UnrollSchedule parse(const std::string& text) {
    UnrollSchedule s;
    s.knots.clear();
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t comma = std::min(text.find(',', pos), text.size());
      const std::string item = text.substr(pos, comma - pos);
      const std::size_t colon = item.find(':');
      require(colon != std::string::npos, ErrorCode::InvalidArgument,
              "schedule item '" + item + "' is not epoch:T");
      s.knots.emplace_back(std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1)));
      pos = comma + 1;
    }
    s.validate();
    return s;
  }

  std::string str() const {
    std::string out;
    for (const auto& [e, t] : knots) out += (out.empty() ? "" : ",") + std::to_string(e) + ":" + std::to_string(t);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

/// Correction for one step given the current state; nullopt means none.
using CorrectionFn = std::function<std::optional<Var>(Var)>;

/// T Euler steps from ic on `tape`; returns T + 1 states.
inline std::vector<Var> rollout(Tape& tape, const PdeSpec& spec, const Tensor& ic, std::size_t T,
                                const CorrectionFn& correction) {
  require(T >= 1, ErrorCode::InvalidArgument, "rollout needs T >= 1");
  std::vector<Var> states{tape.leaf(ic)};
  states.reserve(T + 1);
  for (std::size_t t = 0; t < T; ++t) {
    try {
      states.push_back(euler_step(states.back(), spec, correction ? correction(states.back()) : std::nullopt));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteState || e.code() == ErrorCode::NonFiniteValue) {
        fail(ErrorCode::NonFiniteState, "step " + std::to_string(t + 1) + ": " + e.what());
      }
      throw;
    }
  }
  return states;
}

/// The WNO as a correction source with its parameters bound on a tape.
inline CorrectionFn wno_correction(const WnoModel& model, std::span<const Var> params, Tensor grid) {
  return [&model, params, grid = std::move(grid)](Var u) -> std::optional<Var> {
    return wno_forward(u, grid, model, params);
  };
}

/// Differentiable rollout of the augmented model; params are the bound leaves.
inline std::vector<Var> rollout(Tape& tape, const WnoModel& model, std::span<const Var> params,
                                const PdeSpec& spec, const Tensor& ic, std::size_t T) {
  return rollout(tape, spec, ic, T, wno_correction(model, params, grid_coordinates(spec)));
}

/// Evaluation-only predictor: a stepper, optionally augmented by a model.
struct Surrogate {
  PdeSpec spec;
  const WnoModel* model = nullptr;

  std::vector<Tensor> rollout(const Tensor& ic, std::size_t T) const {
    std::vector<Tensor> out{ic};
    out.reserve(T + 1);
    if (T == 0) return out;
    const Tensor grid = grid_coordinates(spec);
    GridField u{ic, 0};
    for (std::size_t t = 0; t < T; ++t) {
      // A fresh tape per step keeps memory flat over long horizons.
      Tape tape;
      tape.set_grad_enabled(false);
      Var x = tape.leaf(u.values);
      std::optional<Var> corr;
      try {
        if (model != nullptr) {
          const auto p = bind(tape, *model);
          corr = wno_forward(x, grid, *model, p);
        }
        u.values = euler_step(x, spec, corr).value();
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteState || e.code() == ErrorCode::NonFiniteValue) {
          fail(ErrorCode::NonFiniteState, "step " + std::to_string(t + 1) + ": " + e.what());
        }
        throw;
      }
      out.push_back(u.values);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// sum_{t=1..T} sum((pred_t - true_t)^2) * weight, on the predictions' tape.
inline Var trajectory_sse(const std::vector<Var>& pred, const std::vector<Tensor>& truth, std::size_t T,
                          double weight) {
  require(pred.size() >= T + 1 && truth.size() >= T + 1, ErrorCode::ShapeMismatch,
          "trajectory shorter than T + 1 = " + std::to_string(T + 1));
  Tape& tape = pred[0].tape();
  std::optional<Var> acc;
  for (std::size_t t = 1; t <= T; ++t) {
    Var e = sum(square(sub(pred[t], tape.leaf(truth[t]))));
    acc = acc ? add(*acc, e) : e;
  }
  return scale(*acc, weight);
}

/// Mean over (sample, step 1..T, grid value) of squared rollout error.
inline double rollout_loss(const WnoModel& model, const PdeSpec& spec,
                           const std::vector<const std::vector<Tensor>*>& batch, std::size_t T) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
  const double field = static_cast<double>(shape_size(spec.field_shape()));
  const double weight = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(T) * field);
  double total = 0.0;
  for (const auto* traj : batch) {
    Tape tape;
    tape.set_grad_enabled(false);
    const auto p = bind(tape, model);
    const auto pred = rollout(tape, model, p, spec, traj->at(0), T);
    total += trajectory_sse(pred, *traj, T, weight).value().item();
  }
  return total;
}

/// Loss and dLoss/dparams (model order) for one batch; samples are
/// independent tapes and their gradients are summed in batch order.
struct BatchGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

inline BatchGradient batch_gradient(const WnoModel& model, const PdeSpec& spec,
                                    const std::vector<const std::vector<Tensor>*>& batch, std::size_t T,
                                    std::size_t workers = 1) {
  require(!batch.empty(), ErrorCode::InvalidArgument, "empty batch");
  const double field = static_cast<double>(shape_size(spec.field_shape()));
  const double weight = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(T) * field);
  auto per_sample = parallel_map<BatchGradient>(batch.size(), workers, [&](std::size_t i) {
    Tape tape;
    const auto p = bind(tape, model);
    const auto pred = rollout(tape, model, p, spec, batch[i]->at(0), T);
    Var loss = trajectory_sse(pred, *batch[i], T, weight);
    const Gradients g = backward(tape, loss);
    BatchGradient out{loss.value().item(), {}};
    out.grads.reserve(p.size());
    for (const Var& v : p) out.grads.push_back(g.get(v));
    return out;
  });
  BatchGradient total = std::move(per_sample[0]);
  for (std::size_t i = 1; i < per_sample.size(); ++i) {
    total.loss += per_sample[i].loss;
    for (std::size_t k = 0; k < total.grads.size(); ++k) total.grads[k] += per_sample[i].grads[k];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const WnoModel& model, double lr, AdamConfig cfg = {}) : lr_(lr), cfg_(cfg) {
    for (const auto& p : model.params()) {
      m_.push_back(Tensor::like(p.value));
      v_.push_back(Tensor::like(p.value));
    }
  }

  void step(WnoModel& model, const std::vector<Tensor>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& params = model.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& w = params[k].value;
      const auto& g = grads[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        w[i] -= lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + cfg_.eps);
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

inline double global_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += dot(g, g);
  return std::sqrt(s);
}

/// Rescales grads to norm max_norm if larger; returns the norm before clipping.
inline double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  const double n = global_norm(grads);
  if (max_norm > 0.0 && n > max_norm) {
    const double f = max_norm / n;
    for (auto& g : grads) {
      for (auto& v : g.vec()) v *= f;
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 500;
  UnrollSchedule schedule;
  std::size_t batch_size = 8;
  double learning_rate = 0.005;
  AdamConfig adam;
  double clip_norm = 10.0;  // <= 0 disables
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables
  std::size_t workers = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t T = 0;
  double mean_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  double wall_seconds = 0.0;
  std::string normalization = "mean over samples, steps and grid values";
};

using CheckpointFn = std::function<void(std::size_t epoch, const WnoModel&)>;
using EpochFn = std::function<void(const EpochRecord&)>;

inline TrainReport train(WnoModel& model, const Dataset& data, const PdeSpec& partial,
                         const TrainConfig& cfg, const CheckpointFn& on_checkpoint = {},
                         const EpochFn& on_epoch = {}) {
  validate(partial);
  require(partial.benchmark == data.spec.benchmark && partial.nx == data.spec.nx &&
              partial.ny == data.spec.ny && partial.dt == data.spec.dt,
          ErrorCode::InvalidArgument, "dataset and partial physics describe different problems");
  require(partial.terms.subset_of(full_terms(partial.benchmark)), ErrorCode::UnsupportedTermForBenchmark,
          "partial terms {" + partial.terms.str() + "}");
  require(data.samples() > 0, ErrorCode::InvalidArgument, "empty dataset");
  require(cfg.batch_size >= 1, ErrorCode::InvalidArgument, "batch size must be >= 1");
  cfg.schedule.validate();
  const std::size_t t_needed = cfg.schedule.at(cfg.epochs == 0 ? 0 : cfg.epochs - 1);
  require(t_needed <= data.steps(), ErrorCode::ScheduleExhausted,
          "schedule needs " + std::to_string(t_needed) + " steps but the dataset stores " +
              std::to_string(data.steps()));

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Adam opt(model, cfg.learning_rate, cfg.adam);
  TrainReport report;
  std::vector<std::size_t> order(data.samples());
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto epoch_start = clock::now();
    const std::size_t T = cfg.schedule.at(e);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(cfg.seed, Stream::shuffle, e);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      std::vector<const std::vector<Tensor>*> batch;
      for (std::size_t i = b0; i < std::min(order.size(), b0 + cfg.batch_size); ++i) {
        batch.push_back(&data.trajectories[order[i]]);
      }
      BatchGradient bg;
      try {
        bg = batch_gradient(model, partial, batch, T, cfg.workers);
      } catch (const Error& err) {
        if (err.code() == ErrorCode::NonFiniteState || err.code() == ErrorCode::NonFiniteValue) {
          fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(e) + ", batch " +
                                             std::to_string(batches) + ", T " + std::to_string(T) +
                                             ": " + err.what());
        }
        throw;
      }
      require(std::isfinite(bg.loss), ErrorCode::NonFiniteLoss,
              "epoch " + std::to_string(e) + ", batch " + std::to_string(batches) + ", T " +
                  std::to_string(T) + ": loss is not finite");
      clip_global_norm(bg.grads, cfg.clip_norm);
      opt.step(model, bg.grads);
      loss_sum += bg.loss;
      ++batches;
    }
    EpochRecord rec{e, T, loss_sum / static_cast<double>(batches),
                    std::chrono::duration<double, std::milli>(clock::now() - epoch_start).count()};
    report.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (on_checkpoint && cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(e + 1, model);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return report;
}

}  // namespace dpawno
