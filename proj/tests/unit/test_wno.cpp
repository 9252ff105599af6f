#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "dpawno/wno.hpp"
#include "test_util.hpp"

using namespace dpawno;
using dpawno::testing::random_tensor;

namespace {

WnoConfig small_config(std::size_t dims = 1, KernelBands bands = KernelBands::coarsest) {
  WnoConfig c;
  c.width = 4;
  c.layers = 2;
  c.fc1_dim = 6;
  c.wavelet = {WaveletFamily::db4, 2, Extension::periodic};
  c.state_channels = dims;
  c.spatial_dims = dims;
  c.bands = bands;
  return c;
}

WnoModel randomized(const WnoConfig& cfg, std::uint64_t seed) {
  WnoModel m = WnoModel::initialize(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  for (auto& p : m.params()) {
    if (p.value.rank() == 1 || p.name.rfind("fc2.", 0) == 0) p.value = random_tensor(p.value.shape(), rng, -0.5, 0.5);
  }
  return m;
}

Tensor line_grid(std::size_t n) {
  Tensor g({1, n});
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / static_cast<double>(n);
  return g;
}

void set_identity(Tensor& w) {
  for (auto& v : w.vec()) v = 0.0;
  for (std::size_t i = 0; i < w.dim(0); ++i) w[i * w.dim(1) + i] = 1.0;
}

void zero_layer_pointwise(WnoModel& m, std::size_t layer) {
  const std::string p = "layer" + std::to_string(layer) + ".";
  m.param(p + "pointwise.weight") = Tensor::like(m.param(p + "pointwise.weight"));
  m.param(p + "pointwise.bias") = Tensor::like(m.param(p + "pointwise.bias"));
}

Tensor run_layer(const WnoModel& m, const Tensor& v, bool activate) {
  Tape t;
  const auto p = bind(t, m);
  return kernel_layer(t.leaf(v), 0, m, p, activate).value();
}

}  // namespace

TEST(Wno, ZeroInitialOutput) {
  for (std::size_t dims : {1u, 2u}) {
    const WnoConfig cfg = small_config(dims);
    const WnoModel m = WnoModel::initialize(cfg, 3);
    std::mt19937_64 rng(4);
    const PdeSpec s = dims == 1 ? dpawno::testing::nagumo(32) : dpawno::testing::burgers2d(16);
    const Tensor out = wno_forward(m, random_tensor(s.field_shape(), rng), grid_coordinates(s));
    EXPECT_EQ(out.shape(), s.field_shape());
    EXPECT_EQ(out.max_abs(), 0.0);
  }
}

TEST(Wno, InitializationIsSeededGlorot) {
  WnoConfig cfg = small_config();
  const WnoModel a = WnoModel::initialize(cfg, 9);
  EXPECT_EQ(a, WnoModel::initialize(cfg, 9));
  EXPECT_FALSE(a == WnoModel::initialize(cfg, 10));
  const Tensor& w = a.param("layer0.kernel.band0");
  const double bound = std::sqrt(6.0 / 8.0);
  EXPECT_LE(w.max_abs(), bound);
  EXPECT_GT(w.max_abs(), 0.0);
  EXPECT_EQ(a.param("layer1.pointwise.bias").max_abs(), 0.0);
  EXPECT_EQ(a.param("fc2.weight").max_abs(), 0.0);
}

TEST(Wno, OutputShapesAtFullSize) {
  WnoConfig c1 = small_config();
  c1.wavelet = {WaveletFamily::db6, 4, Extension::periodic};
  const WnoModel m1 = randomized(c1, 1);
  const PdeSpec ac = dpawno::testing::allen_cahn(112);
  std::mt19937_64 rng(2);
  const Tensor o1 = wno_forward(m1, random_tensor(ac.field_shape(), rng), grid_coordinates(ac));
  EXPECT_EQ(o1.shape(), (Shape{1, 112}));
  EXPECT_TRUE(o1.all_finite());

  WnoConfig c2 = small_config(2);
  c2.wavelet = {WaveletFamily::db6, 3, Extension::periodic};
  const WnoModel m2 = randomized(c2, 1);
  const PdeSpec b2 = dpawno::testing::burgers2d(64);
  const Tensor o2 = wno_forward(m2, random_tensor(b2.field_shape(), rng), grid_coordinates(b2));
  EXPECT_EQ(o2.shape(), (Shape{2, 64, 64}));
  EXPECT_TRUE(o2.all_finite());
}

TEST(Wno, ParameterCountIndependentOfResolution) {
  const WnoConfig cfg = small_config();
  const WnoModel m = randomized(cfg, 5);
  const std::size_t w = 4, f = 6, nb = 2;
  const std::size_t expected = w * 2 + w + 2 * (nb * w * w + w * w + w) + f * w + f + f + 1;
  EXPECT_EQ(m.parameter_count(), expected);
  std::mt19937_64 rng(6);
  for (std::size_t n : {32u, 64u, 112u}) {
    EXPECT_EQ(wno_forward(m, random_tensor({1, n}, rng), line_grid(n)).shape(), (Shape{1, n}));
  }
  EXPECT_EQ(small_config(1, KernelBands::all).band_count(), 3u);
  EXPECT_EQ(small_config(2, KernelBands::all).band_count(), 7u);
  EXPECT_EQ(small_config(2).band_count(), 4u);
}

TEST(Wno, LiftMatchesHandComputation) {
  const WnoModel m = randomized(small_config(), 7);
  const Tensor u({1, 3}, {0.5, -1.0, 2.0});
  const Tensor g({1, 3}, {0.0, 0.25, 0.5});
  Tape t;
  const auto p = bind(t, m);
  const Tensor v = lift(concat_channels({t.leaf(u), t.leaf(g)}), p).value();
  const Tensor& w = m.param("lift.weight");
  const Tensor& b = m.param("lift.bias");
  for (std::size_t o = 0; o < 4; ++o) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(v[o * 3 + i], w[o * 2] * u[i] + w[o * 2 + 1] * g[i] + b[o], 1e-15);
    }
  }
}

TEST(Wno, AffineKernelLayerIsLinear) {
  for (auto bands : {KernelBands::coarsest, KernelBands::all}) {
    for (std::size_t dims : {1u, 2u}) {
      WnoModel m = randomized(small_config(dims, bands), 8);
      m.param("layer0.pointwise.bias") = Tensor::like(m.param("layer0.pointwise.bias"));
      std::mt19937_64 rng(9);
      const Shape s = dims == 1 ? Shape{4, 16} : Shape{4, 8, 8};
      const Tensor x = random_tensor(s, rng), y = random_tensor(s, rng);
      Tensor mix(s);
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * x[i] - 0.5 * y[i];
      const Tensor fx = run_layer(m, x, false), fy = run_layer(m, y, false), fm = run_layer(m, mix, false);
      double err = 0.0;
      for (std::size_t i = 0; i < fm.size(); ++i) err = std::max(err, std::abs(fm[i] - (2.0 * fx[i] - 0.5 * fy[i])));
      EXPECT_LT(err, 1e-12) << to_string(bands) << " " << dims;
      // The activated layer is not.
      const Tensor ax = run_layer(m, x, true), am = run_layer(m, mix, true);
      EXPECT_GT(max_abs_diff(am, ax), 0.0);
    }
  }
}

TEST(Wno, IdentityBandWeightsReproduceInput) {
  for (auto bands : {KernelBands::coarsest, KernelBands::all}) {
    for (std::size_t dims : {1u, 2u}) {
      WnoModel m = randomized(small_config(dims, bands), 10);
      zero_layer_pointwise(m, 0);
      for (std::size_t b = 0; b < m.config().band_count(); ++b) {
        set_identity(m.param("layer0.kernel.band" + std::to_string(b)));
      }
      std::mt19937_64 rng(11);
      const Tensor x = random_tensor(dims == 1 ? Shape{4, 32} : Shape{4, 16, 16}, rng);
      EXPECT_LT(max_abs_diff(run_layer(m, x, false), x), 1e-12) << to_string(bands) << " " << dims;
    }
  }
}

TEST(Wno, UnweightedBandsPassThrough) {
  // Zero weights on the mixed bands remove exactly those bands from the output.
  WnoModel m = randomized(small_config(), 12);
  zero_layer_pointwise(m, 0);
  for (std::size_t b = 0; b < 2; ++b) m.param("layer0.kernel.band" + std::to_string(b)) = Tensor({4, 4}, 0.0);
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor({4, 32}, rng);
  const WaveletSpec ws = m.config().wavelet;
  auto c = dwt_multilevel(x, ws);
  c.approx = Tensor::like(c.approx);
  c.details[0] = Tensor::like(c.details[0]);
  EXPECT_LT(max_abs_diff(run_layer(m, x, false), idwt_multilevel(c, ws)), 1e-12);
}

TEST(Wno, GradientsMatchFiniteDifferences) {
  for (std::size_t dims : {1u, 2u}) {
    const WnoModel m = randomized(small_config(dims), 14);
    std::mt19937_64 rng(15);
    const PdeSpec s = dims == 1 ? dpawno::testing::nagumo(16) : dpawno::testing::burgers2d(8);
    const Tensor u = random_tensor(s.field_shape(), rng);
    const Tensor grid = grid_coordinates(s);
    const Tensor w = random_tensor(s.field_shape(), rng);
    for (const std::string name : {"lift.weight", "layer0.kernel.band1", "layer1.pointwise.weight", "fc1.bias"}) {
      const std::size_t k = m.index_of(name);
      LossFn f = [&](Var x) {
        auto p = bind(x.tape(), m);
        p[k] = x;
        return sum(mul(wno_forward(x.tape().leaf(u), grid, m, p), x.tape().leaf(w)));
      };
      EXPECT_LT(check_gradient(f, m.params()[k].value, 1e-5), 1e-5) << name << " " << dims;
    }
    LossFn fu = [&](Var x) {
      auto p = bind(x.tape(), m);
      return sum(mul(wno_forward(x, grid, m, p), x.tape().leaf(w)));
    };
    EXPECT_LT(check_gradient(fu, u, 1e-5), 1e-5) << "input " << dims;
  }
}

TEST(Wno, ShapeErrors) {
  const WnoModel m = randomized(small_config(), 16);
  EXPECT_THROW_CODE(wno_forward(m, Tensor({2, 16}), line_grid(16)), ErrorCode::ShapeMismatch);
  EXPECT_THROW_CODE(wno_forward(m, Tensor({1, 16}), line_grid(32)), ErrorCode::ShapeMismatch);
  EXPECT_THROW_CODE(wno_forward(m, Tensor({1, 6}), line_grid(6)), ErrorCode::SignalTooShort);
  EXPECT_THROW_CODE(m.index_of("nope"), ErrorCode::InvalidArgument);
}

TEST(Wno, CheckpointRoundTrip) {
  const auto dir = dpawno::testing::temp_dir("wno_ckpt");
  const WnoModel m = randomized(small_config(2, KernelBands::all), 17);
  save_checkpoint(dir / "m.ckpt", m, {{"mode", "dpa"}, {"terms", "advection,diffusion_y"}});
  const Checkpoint ck = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(ck.model, m);
  EXPECT_EQ(ck.meta.at("mode"), "dpa");
  EXPECT_EQ(ck.meta.at("terms"), "advection,diffusion_y");
  std::mt19937_64 rng(18);
  const PdeSpec s = dpawno::testing::burgers2d(16);
  const Tensor u = random_tensor(s.field_shape(), rng);
  EXPECT_EQ(wno_forward(ck.model, u, grid_coordinates(s)), wno_forward(m, u, grid_coordinates(s)));
}

TEST(Wno, CheckpointErrors) {
  const auto dir = dpawno::testing::temp_dir("wno_ckpt_err");
  const WnoModel m = randomized(small_config(), 19);
  save_checkpoint(dir / "m.ckpt", m);
  auto bytes = io::read_file(dir / "m.ckpt");

  auto truncated = bytes;
  truncated.resize(bytes.size() - 40);
  io::write_file(dir / "short.ckpt", truncated);
  EXPECT_THROW_CODE(load_checkpoint(dir / "short.ckpt"), ErrorCode::ChecksumMismatch);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  io::write_file(dir / "flip.ckpt", flipped);
  EXPECT_THROW_CODE(load_checkpoint(dir / "flip.ckpt"), ErrorCode::ChecksumMismatch);

  auto newer = bytes;
  newer[4] = static_cast<char>(kCheckpointVersion + 1);
  io::write_file(dir / "new.ckpt", newer);
  EXPECT_THROW_CODE(load_checkpoint(dir / "new.ckpt"), ErrorCode::FormatVersionMismatch);

  io::write_text(dir / "text.ckpt", "hello world, not a model");
  EXPECT_THROW_CODE(load_checkpoint(dir / "text.ckpt"), ErrorCode::IoError);
  EXPECT_THROW_CODE(load_checkpoint(dir / "missing.ckpt"), ErrorCode::IoError);
}
