#pragma once

// Define-by-run reverse-mode differentiation over dense Tensors.
//
// A Tape owns every intermediate value. Ops append a node holding the output
// value, the parent ids and a closure that pushes the output adjoint into the
// parents. Parents always precede children, so backward is a single reverse
// sweep. Tapes are not thread-safe; use one per thread.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpawno/error.hpp"
#include "dpawno/tensor.hpp"

namespace dpawno {

enum class Primitive {
  Leaf,
  Add,
  Sub,
  Mul,
  ScalarMul,
  ScalarAdd,
  MatMul,
  Gelu,
  Slice,
  Concat,
  Sum,
  Mean,
  Square,
  DwtLevel,
  IdwtLevel,
  Stencil,
  Upwind,
  SetBoundary,
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the Tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  inline const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using GradSlots = std::vector<std::optional<Tensor>>;

/// Adjoint rule: receives dL/d(output) and accumulates into the parents' slots.
using BackwardFn = std::function<void(const Tensor& grad_out, GradSlots& grads)>;

inline Tensor& grad_slot(GradSlots& grads, std::size_t id, const Shape& shape) {
  auto& slot = grads[id];
  if (!slot) slot.emplace(shape, 0.0);
  return *slot;
}

class Tape {
 public:
  struct Node {
    Primitive op;
    std::vector<std::size_t> parents;
    Tensor value;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Evaluation-only tapes skip storing adjoint closures.
  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }

  Var leaf(Tensor value) { return push(Primitive::Leaf, {}, std::move(value), nullptr); }

  Var push(Primitive op, std::vector<std::size_t> parents, Tensor value, BackwardFn backward) {
    const std::size_t id = nodes_.size();
    for (std::size_t p : parents) {
      require(p < id, ErrorCode::InvalidArgument, "parent id must precede child");
    }
    if (!value.all_finite()) {
      fail(ErrorCode::NonFiniteValue, "non-finite output at node " + std::to_string(id));
    }
    nodes_.push_back(Node{op, std::move(parents), std::move(value),
                          grad_enabled_ ? std::move(backward) : BackwardFn{}});
    return Var(this, id);
  }

  void clear() noexcept { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

/// Result of a backward sweep: dseed/dnode for each ancestor of the seed.
class Gradients {
 public:
  explicit Gradients(GradSlots slots) : slots_(std::move(slots)) {}

  bool has(std::size_t id) const { return id < slots_.size() && slots_[id].has_value(); }
  bool has(Var v) const { return has(v.id()); }

  const Tensor& at(std::size_t id) const {
    require(has(id), ErrorCode::InvalidArgument, "no gradient for node " + std::to_string(id));
    return *slots_[id];
  }
  const Tensor& at(Var v) const { return at(v.id()); }

  /// Gradient of v, or zeros of v's shape when v is not an ancestor.
  Tensor get(Var v) const { return has(v) ? *slots_[v.id()] : Tensor(v.shape(), 0.0); }

 private:
  GradSlots slots_;
};

inline Gradients backward(const Tape& tape, Var seed) {
  require(tape.size() > 0, ErrorCode::EmptyTape, "backward on empty tape");
  require(&seed.tape() == &tape, ErrorCode::InvalidArgument, "seed is not on this tape");
  require(seed.value().size() == 1, ErrorCode::NonScalarSeed,
          "seed has shape " + shape_str(seed.shape()));
  GradSlots grads(seed.id() + 1);
  grads[seed.id()].emplace(seed.shape(), 1.0);
  for (std::size_t i = seed.id() + 1; i-- > 0;) {
    if (!grads[i]) continue;
    const auto& node = tape.node(i);
    if (node.parents.empty()) continue;
    require(static_cast<bool>(node.backward), ErrorCode::InvalidArgument,
            "tape recorded without gradients");
    // Parents precede i, so the closure never touches slot i.
    Tensor g = std::move(*grads[i]);
    node.backward(g, grads);
    grads[i] = std::move(g);
  }
  return Gradients(std::move(grads));
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

namespace detail {

inline void check_same_tape(Var a, Var b) {
  require(&a.tape() == &b.tape(), ErrorCode::InvalidArgument, "operands on different tapes");
}

inline void check_same_shape(Var a, Var b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(Primitive::Add, {ia, ib}, std::move(out),
                       [ia, ib](const Tensor& g, GradSlots& grads) {
                         grad_slot(grads, ia, g.shape()) += g;
                         grad_slot(grads, ib, g.shape()) += g;
                       });
}

inline Var sub(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b, "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(Primitive::Sub, {ia, ib}, std::move(out),
                       [ia, ib](const Tensor& g, GradSlots& grads) {
                         grad_slot(grads, ia, g.shape()) += g;
                         auto& gb = grad_slot(grads, ib, g.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       });
}

inline Var mul(Var a, Var b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tape* t = &a.tape();
  const std::size_t ia = a.id(), ib = b.id();
  return t->push(Primitive::Mul, {ia, ib}, std::move(out),
                 [t, ia, ib](const Tensor& g, GradSlots& grads) {
                   const auto& av = t->value(ia);
                   const auto& bv = t->value(ib);
                   auto& ga = grad_slot(grads, ia, g.shape());
                   for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                   auto& gb = grad_slot(grads, ib, g.shape());
                   for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                 });
}

inline Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v *= s;
  const std::size_t ia = a.id();
  return a.tape().push(Primitive::ScalarMul, {ia}, std::move(out),
                       [ia, s](const Tensor& g, GradSlots& grads) {
                         auto& ga = grad_slot(grads, ia, g.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                       });
}

/// a + s elementwise.
inline Var shift(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v += s;
  const std::size_t ia = a.id();
  return a.tape().push(Primitive::ScalarAdd, {ia}, std::move(out),
                       [ia](const Tensor& g, GradSlots& grads) {
                         grad_slot(grads, ia, g.shape()) += g;
                       });
}

inline Var square(Var a) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v *= v;
  Tape* t = &a.tape();
  const std::size_t ia = a.id();
  return t->push(Primitive::Square, {ia}, std::move(out), [t, ia](const Tensor& g, GradSlots& grads) {
    const auto& av = t->value(ia);
    auto& ga = grad_slot(grads, ia, g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
  });
}

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

inline double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace detail

/// tanh-approximated GeLU.
inline Var gelu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.vec()) v = detail::gelu(v);
  Tape* t = &a.tape();
  const std::size_t ia = a.id();
  return t->push(Primitive::Gelu, {ia}, std::move(out), [t, ia](const Tensor& g, GradSlots& grads) {
    const auto& av = t->value(ia);
    auto& ga = grad_slot(grads, ia, g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += detail::gelu_grad(av[i]) * g[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  const Shape in_shape = a.shape();
  return a.tape().push(Primitive::Sum, {ia}, Tensor::scalar(s),
                       [ia, in_shape](const Tensor& g, GradSlots& grads) {
                         auto& ga = grad_slot(grads, ia, in_shape);
                         for (auto& v : ga.vec()) v += g[0];
                       });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  const Shape in_shape = a.shape();
  return a.tape().push(Primitive::Mean, {ia}, Tensor::scalar(s / n),
                       [ia, in_shape, n](const Tensor& g, GradSlots& grads) {
                         auto& ga = grad_slot(grads, ia, in_shape);
                         const double share = g[0] / n;
                         for (auto& v : ga.vec()) v += share;
                       });
}

// ---------------------------------------------------------------------------
// Channel mixing: W[out,in] applied to x[in, spatial...] (or x[in]).
// ---------------------------------------------------------------------------

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline std::size_t trailing_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

}  // namespace detail

inline Var channel_mix(Var w, Var x, std::optional<Var> bias = std::nullopt) {
  detail::check_same_tape(w, x);
  const auto& ws = w.shape();
  const auto& xs = x.shape();
  require(ws.size() == 2 && !xs.empty() && xs[0] == ws[1], ErrorCode::ShapeMismatch,
          "matmul " + shape_str(ws) + " * " + shape_str(xs));
  const std::size_t n_out = ws[0], n_in = ws[1];
  const std::size_t spatial = detail::trailing_size(xs);
  if (bias) {
    require(bias->shape() == Shape{n_out}, ErrorCode::ShapeMismatch,
            "bias " + shape_str(bias->shape()) + " for " + std::to_string(n_out) + " outputs");
  }
  Shape out_shape = xs;
  out_shape[0] = n_out;
  Tensor out(out_shape);
  {
    detail::ConstMap W(w.value().data().data(), n_out, n_in);
    detail::ConstMap X(x.value().data().data(), n_in, spatial);
    detail::MutMap Y(out.data().data(), n_out, spatial);
    Y.noalias() = W * X;
    if (bias) {
      const auto& b = bias->value();
      for (std::size_t o = 0; o < n_out; ++o) Y.row(o).array() += b[o];
    }
  }
  Tape* t = &w.tape();
  const std::size_t iw = w.id(), ix = x.id();
  std::vector<std::size_t> parents{iw, ix};
  std::optional<std::size_t> ib;
  if (bias) {
    ib = bias->id();
    parents.push_back(*ib);
  }
  const Shape x_shape = xs;
  return t->push(Primitive::MatMul, std::move(parents), std::move(out),
                 [t, iw, ix, ib, n_out, n_in, spatial, x_shape](const Tensor& g, GradSlots& grads) {
                   detail::ConstMap G(g.data().data(), n_out, spatial);
                   detail::ConstMap W(t->value(iw).data().data(), n_out, n_in);
                   detail::ConstMap X(t->value(ix).data().data(), n_in, spatial);
                   auto& gw = grad_slot(grads, iw, Shape{n_out, n_in});
                   detail::MutMap GW(gw.data().data(), n_out, n_in);
                   GW.noalias() += G * X.transpose();
                   auto& gx = grad_slot(grads, ix, x_shape);
                   detail::MutMap GX(gx.data().data(), n_in, spatial);
                   GX.noalias() += W.transpose() * G;
                   if (ib) {
                     auto& gb = grad_slot(grads, *ib, Shape{n_out});
                     for (std::size_t o = 0; o < n_out; ++o) gb[o] += G.row(o).sum();
                   }
                 });
}

// ---------------------------------------------------------------------------
// Channel slicing / stacking along axis 0
// ---------------------------------------------------------------------------

inline Var slice_channels(Var x, std::size_t begin, std::size_t count) {
  const auto& xs = x.shape();
  require(!xs.empty() && begin + count <= xs[0] && count > 0, ErrorCode::ShapeMismatch,
          "slice [" + std::to_string(begin) + ", +" + std::to_string(count) + ") of " +
              shape_str(xs));
  const std::size_t inner = detail::trailing_size(xs);
  Shape out_shape = xs;
  out_shape[0] = count;
  const auto src = x.value().data().subspan(begin * inner, count * inner);
  Tensor out(out_shape, std::vector<double>(src.begin(), src.end()));
  const std::size_t ix = x.id();
  const Shape x_shape = xs;
  return x.tape().push(Primitive::Slice, {ix}, std::move(out),
                       [ix, x_shape, begin, inner](const Tensor& g, GradSlots& grads) {
                         auto& gx = grad_slot(grads, ix, x_shape);
                         for (std::size_t i = 0; i < g.size(); ++i) gx[begin * inner + i] += g[i];
                       });
}

inline Var concat_channels(std::span<const Var> parts) {
  require(!parts.empty(), ErrorCode::ShapeMismatch, "concat of nothing");
  Tape* t = &parts[0].tape();
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  out_shape[0] = 0;
  std::vector<std::size_t> ids;
  std::vector<double> data;
  for (const Var& p : parts) {
    require(&p.tape() == t, ErrorCode::InvalidArgument, "operands on different tapes");
    const auto& ps = p.shape();
    require(ps.size() == first.size() && std::equal(ps.begin() + 1, ps.end(), first.begin() + 1),
            ErrorCode::ShapeMismatch, "concat " + shape_str(ps) + " with " + shape_str(first));
    out_shape[0] += ps[0];
    ids.push_back(p.id());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  std::vector<Shape> shapes;
  for (const Var& p : parts) shapes.push_back(p.shape());
  return t->push(Primitive::Concat, ids, Tensor(out_shape, std::move(data)),
                 [ids, shapes](const Tensor& g, GradSlots& grads) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < ids.size(); ++k) {
                     auto& gk = grad_slot(grads, ids[k], shapes[k]);
                     for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[off + i];
                     off += gk.size();
                   }
                 });
}

inline Var concat_channels(std::initializer_list<Var> parts) {
  return concat_channels(std::span<const Var>(parts.begin(), parts.size()));
}

// ---------------------------------------------------------------------------
// Generic dispatch for attribute-free primitives
// ---------------------------------------------------------------------------

/// Records an attribute-free primitive. Primitives that need attributes
/// (scale factor, slice range, wavelet, stencil) have dedicated functions.
inline Var record(Primitive op, std::span<const Var> in) {
  auto arity = [&](std::size_t n) {
    require(in.size() == n, ErrorCode::ShapeMismatch,
            "primitive expects " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
  };
  switch (op) {
    case Primitive::Add: arity(2); return add(in[0], in[1]);
    case Primitive::Sub: arity(2); return sub(in[0], in[1]);
    case Primitive::Mul: arity(2); return mul(in[0], in[1]);
    case Primitive::MatMul:
      if (in.size() == 3) return channel_mix(in[0], in[1], in[2]);
      arity(2);
      return channel_mix(in[0], in[1]);
    case Primitive::Gelu: arity(1); return gelu(in[0]);
    case Primitive::Sum: arity(1); return sum(in[0]);
    case Primitive::Mean: arity(1); return mean(in[0]);
    case Primitive::Square: arity(1); return square(in[0]);
    case Primitive::Concat: return concat_channels(in);
    default: break;
  }
  fail(ErrorCode::UnknownPrimitive,
       "primitive " + std::to_string(static_cast<int>(op)) + " cannot be recorded generically");
}

inline Var record(Primitive op, std::initializer_list<Var> in) {
  return record(op, std::span<const Var>(in.begin(), in.size()));
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

using LossFn = std::function<Var(Var)>;

/// Max over coordinates of |autodiff - central difference| / (|central difference| + 1e-12).
inline double check_gradient(const LossFn& loss_fn, const Tensor& point, double step) {
  require(step > 0.0, ErrorCode::InvalidArgument, "step must be positive");
  auto eval = [&](const Tensor& p) {
    Tape tape;
    tape.set_grad_enabled(false);
    double v = 0.0;
    try {
      v = loss_fn(tape.leaf(p)).value().item();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteValue) fail(ErrorCode::NonFiniteLoss, e.what());
      throw;
    }
    require(std::isfinite(v), ErrorCode::NonFiniteLoss, "loss is not finite");
    return v;
  };

  Tape tape;
  Var x = tape.leaf(point);
  Var loss = loss_fn(x);
  require(std::isfinite(loss.value().item()), ErrorCode::NonFiniteLoss, "loss is not finite");
  const Tensor analytic = backward(tape, loss).get(x);

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = eval(probe);
    probe[i] = point[i] - step;
    const double down = eval(probe);
    probe[i] = point[i];
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(fd) + 1e-12));
  }
  return worst;
}

}  // namespace dpawno
