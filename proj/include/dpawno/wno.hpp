#pragma once

// Wavelet neural operator: pointwise lift P, L kernel integral layers
//   v <- act( idwt(R . dwt(v)) + W v + b )
// and a two-layer pointwise downlift Q. R mixes channels with one dense
// width x width matrix per weighted sub-band, shared across coefficients, so
// the parameter count does not depend on the grid.

#include <cmath>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpawno/autodiff.hpp"
#include "dpawno/error.hpp"
#include "dpawno/io.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/tensor.hpp"
#include "dpawno/wavelet.hpp"

namespace dpawno {

/// Which sub-bands carry learnable mixing: the coarsest approximation and
/// coarsest detail band(s), or every band. Unweighted bands pass through.
enum class KernelBands { coarsest, all };

inline std::string to_string(KernelBands b) { return b == KernelBands::coarsest ? "coarsest" : "all"; }

inline KernelBands parse_kernel_bands(const std::string& s) {
  if (s == "coarsest") return KernelBands::coarsest;
  if (s == "all") return KernelBands::all;
  fail(ErrorCode::InvalidArgument, "unknown kernel bands '" + s + "'");
}

struct WnoConfig {
  std::size_t width = 64;
  std::size_t layers = 4;
  WaveletSpec wavelet{};
  std::size_t fc1_dim = 128;
  std::size_t state_channels = 1;
  std::size_t spatial_dims = 1;
  KernelBands bands = KernelBands::coarsest;

  /// State channels followed by one coordinate channel per spatial axis.
  std::size_t in_channels() const noexcept { return state_channels + spatial_dims; }
  std::size_t out_channels() const noexcept { return state_channels; }

  /// Weighted sub-bands per layer.
  std::size_t band_count() const noexcept {
    const std::size_t per_level = spatial_dims == 2 ? 3 : 1;
    const std::size_t detail_levels =
        bands == KernelBands::coarsest ? 1 : static_cast<std::size_t>(wavelet.levels);
    return 1 + per_level * detail_levels;
  }

  void validate() const {
    require(width >= 1 && layers >= 1 && fc1_dim >= 1 && state_channels >= 1,
            ErrorCode::InvalidArgument, "width, layers, fc1_dim and state_channels must be >= 1");
    require(spatial_dims == 1 || spatial_dims == 2, ErrorCode::InvalidArgument,
            "spatial_dims must be 1 or 2");
    require(wavelet.levels >= 1, ErrorCode::InvalidArgument, "wavelet levels must be >= 1");
  }

  friend bool operator==(const WnoConfig& a, const WnoConfig& b) {
    return a.width == b.width && a.layers == b.layers && a.wavelet.family == b.wavelet.family &&
           a.wavelet.levels == b.wavelet.levels && a.wavelet.extension == b.wavelet.extension &&
           a.fc1_dim == b.fc1_dim && a.state_channels == b.state_channels &&
           a.spatial_dims == b.spatial_dims && a.bands == b.bands;
  }
};

struct Parameter {
  std::string name;
  Tensor value;
};

/// Parameter order: lift, then per layer (bands..., pointwise.weight,
/// pointwise.bias), then fc1 and fc2.
class WnoModel {
 public:
  explicit WnoModel(WnoConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t w = cfg_.width;
    add("lift.weight", {w, cfg_.in_channels()});
    add("lift.bias", {w});
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      for (std::size_t b = 0; b < cfg_.band_count(); ++b) add(p + "kernel.band" + std::to_string(b), {w, w});
      add(p + "pointwise.weight", {w, w});
      add(p + "pointwise.bias", {w});
    }
    add("fc1.weight", {cfg_.fc1_dim, w});
    add("fc1.bias", {cfg_.fc1_dim});
    add("fc2.weight", {cfg_.out_channels(), cfg_.fc1_dim});
    add("fc2.bias", {cfg_.out_channels()});
  }

  /// Glorot-uniform weights, zero biases, zero output layer.
  static WnoModel initialize(const WnoConfig& cfg, std::uint64_t seed) {
    WnoModel m(cfg);
    Rng rng(seed);
    for (auto& p : m.params_) {
      if (p.value.rank() != 2 || p.name.rfind("fc2.", 0) == 0) continue;
      const double fan_out = static_cast<double>(p.value.dim(0));
      const double fan_in = static_cast<double>(p.value.dim(1));
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : p.value.vec()) v = uniform(rng, -a, a);
    }
    return m;
  }

  const WnoConfig& config() const noexcept { return cfg_; }
  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    fail(ErrorCode::InvalidArgument, "no parameter named '" + name + "'");
  }
  Tensor& param(const std::string& name) { return params_[index_of(name)].value; }
  const Tensor& param(const std::string& name) const { return params_[index_of(name)].value; }

  std::size_t layer_offset(std::size_t layer) const noexcept {
    return 2 + layer * (cfg_.band_count() + 2);
  }
  std::size_t head_offset() const noexcept { return layer_offset(cfg_.layers); }

  friend bool operator==(const WnoModel& a, const WnoModel& b) {
    if (!(a.cfg_ == b.cfg_) || a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i) {
      if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  void add(std::string name, Shape shape) { params_.push_back({std::move(name), Tensor(std::move(shape))}); }

  WnoConfig cfg_;
  std::vector<Parameter> params_;
};

/// Places every parameter on the tape as a leaf, in model order.
inline std::vector<Var> bind(Tape& tape, const WnoModel& m) {
  std::vector<Var> vars;
  vars.reserve(m.params().size());
  for (const auto& p : m.params()) vars.push_back(tape.leaf(p.value));
  return vars;
}

/// Pointwise affine map from [in_channels, spatial...] to [width, spatial...].
inline Var lift(Var input, std::span<const Var> p) {
  return channel_mix(p[0], input, p[1]);
}

/// One kernel integral layer. `activate` = false yields the affine update.
inline Var kernel_layer(Var v, std::size_t layer, const WnoModel& m, std::span<const Var> p,
                        bool activate) {
  const auto& cfg = m.config();
  require(!v.shape().empty() && v.shape()[0] == cfg.width, ErrorCode::ShapeMismatch,
          "kernel layer expects " + std::to_string(cfg.width) + " channels, got " +
              shape_str(v.shape()));
  const std::size_t off = m.layer_offset(layer);
  const std::size_t nb = cfg.band_count();
  Var spectral;
  if (cfg.spatial_dims == 1) {
    VarCoeffs c = dwt_multilevel(v, cfg.wavelet);
    c.approx = channel_mix(p[off], c.approx);
    for (std::size_t b = 1; b < nb; ++b) c.details[b - 1] = channel_mix(p[off + b], c.details[b - 1]);
    spectral = idwt_multilevel(c, cfg.wavelet);
  } else {
    VarCoeffs2D c = dwt2d_multilevel(v, cfg.wavelet);
    c.approx = channel_mix(p[off], c.approx);
    for (std::size_t b = 1; b < nb; ++b) {
      auto& band = c.details[(b - 1) / 3][(b - 1) % 3];
      band = channel_mix(p[off + b], band);
    }
    spectral = idwt2d_multilevel(c, cfg.wavelet);
  }
  Var out = add(spectral, channel_mix(p[off + nb], v, p[off + nb + 1]));
  return activate ? gelu(out) : out;
}

/// Q(G_L(...G_1(P([u; grid])))): the correction field, shaped like u.
inline Var wno_forward(Var u, const Tensor& grid, const WnoModel& m, std::span<const Var> p) {
  const auto& cfg = m.config();
  require(p.size() == m.params().size(), ErrorCode::ShapeMismatch,
          "expected " + std::to_string(m.params().size()) + " bound parameters");
  const Shape& us = u.shape();
  require(us.size() == 1 + cfg.spatial_dims && us[0] == cfg.state_channels,
          ErrorCode::ShapeMismatch,
          "state " + shape_str(us) + " does not match model with " +
              std::to_string(cfg.state_channels) + " channels in " +
              std::to_string(cfg.spatial_dims) + "D");
  require(grid.rank() == us.size() && grid.dim(0) == cfg.spatial_dims &&
              std::equal(us.begin() + 1, us.end(), grid.shape().begin() + 1),
          ErrorCode::ShapeMismatch, "grid " + shape_str(grid.shape()) + " vs state " + shape_str(us));
  for (std::size_t a = 1; a < us.size(); ++a) validate_levels(us[a], cfg.wavelet);

  Var x = concat_channels({u, u.tape().leaf(grid)});
  Var v = lift(x, p);
  for (std::size_t l = 0; l < cfg.layers; ++l) v = kernel_layer(v, l, m, p, l + 1 < cfg.layers);
  const std::size_t h = m.head_offset();
  Var hidden = gelu(channel_mix(p[h], v, p[h + 1]));
  return channel_mix(p[h + 2], hidden, p[h + 3]);
}

/// Evaluation-only forward pass.
inline Tensor wno_forward(const WnoModel& m, const Tensor& u, const Tensor& grid) {
  Tape tape;
  tape.set_grad_enabled(false);
  const auto p = bind(tape, m);
  return wno_forward(tape.leaf(u), grid, m, p).value();
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  WnoModel model;
  std::map<std::string, std::string> meta;
};

inline void save_checkpoint(const std::filesystem::path& path, const WnoModel& m,
                            const std::map<std::string, std::string>& meta = {}) {
  const auto& c = m.config();
  io::Writer w;
  w.pod(std::array<char, 4>{'D', 'P', 'A', 'W'});
  w.pod(kCheckpointVersion);
  for (std::uint64_t v : {std::uint64_t(c.width), std::uint64_t(c.layers), std::uint64_t(c.fc1_dim),
                          std::uint64_t(c.state_channels), std::uint64_t(c.spatial_dims),
                          std::uint64_t(c.wavelet.levels)}) {
    w.pod(v);
  }
  w.str(to_string(c.wavelet.family));
  w.str(to_string(c.wavelet.extension));
  w.str(to_string(c.bands));
  w.pod(static_cast<std::uint64_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint64_t>(m.params().size()));
  for (const auto& p : m.params()) {
    w.str(p.name);
    w.pod(static_cast<std::uint64_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.doubles(p.value.vec());
  }
  const std::uint64_t sum = io::fnv1a64(w.bytes().data(), w.size());
  w.pod(sum);
  io::write_file(path, w.bytes());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto bytes = io::read_file(path);
  require(bytes.size() >= 16 && std::string(bytes.data(), 4) == "DPAW", ErrorCode::IoError,
          "'" + path.string() + "' is not a checkpoint");
  io::Reader r(bytes);
  r.pod<std::array<char, 4>>();
  const auto version = r.pod<std::uint32_t>();
  require(version <= kCheckpointVersion, ErrorCode::FormatVersionMismatch,
          "checkpoint version " + std::to_string(version) + " is newer than supported " +
              std::to_string(kCheckpointVersion));
  const std::uint64_t stored = [&] {
    std::uint64_t s;
    std::memcpy(&s, bytes.data() + bytes.size() - 8, 8);
    return s;
  }();
  require(io::fnv1a64(bytes.data(), bytes.size() - 8) == stored, ErrorCode::ChecksumMismatch,
          "checkpoint '" + path.string() + "' is corrupt or truncated");

  WnoConfig c;
  c.width = r.pod<std::uint64_t>();
  c.layers = r.pod<std::uint64_t>();
  c.fc1_dim = r.pod<std::uint64_t>();
  c.state_channels = r.pod<std::uint64_t>();
  c.spatial_dims = r.pod<std::uint64_t>();
  c.wavelet.levels = static_cast<int>(r.pod<std::uint64_t>());
  c.wavelet.family = parse_wavelet_family(r.str());
  c.wavelet.extension = parse_extension(r.str());
  c.bands = parse_kernel_bands(r.str());
  Checkpoint ck{WnoModel(c), {}};
  const auto n_meta = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  const auto n_params = r.pod<std::uint64_t>();
  auto& params = ck.model.params();
  require(n_params == params.size(), ErrorCode::ShapeMismatch,
          "checkpoint has " + std::to_string(n_params) + " parameters, config implies " +
              std::to_string(params.size()));
  for (auto& p : params) {
    const std::string name = r.str();
    Shape s(r.pod<std::uint64_t>());
    for (auto& d : s) d = r.pod<std::uint64_t>();
    require(name == p.name && s == p.value.shape(), ErrorCode::ShapeMismatch,
            "checkpoint parameter " + name + " " + shape_str(s) + " does not match expected " +
                p.name + " " + shape_str(p.value.shape()));
    p.value = Tensor(s, r.doubles(shape_size(s)));
  }
  return ck;
}

}  // namespace dpawno
