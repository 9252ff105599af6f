#include <gtest/gtest.h>

#include <random>

#include "dpawno/uq.hpp"
#include "test_util.hpp"

using namespace dpawno;

namespace {

std::vector<double> normal_samples(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Density gaussian_values(double mean, double lo, double hi, std::size_t n) {
  std::vector<double> s(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = std::exp(-0.5 * (s[i] - mean) * (s[i] - mean));
  }
  return density_from_values(s, v);
}

// Closed form for two unit-variance normals one standard deviation apart.
const double kShiftedGaussianHellinger = std::sqrt(1.0 - std::exp(-1.0 / 8.0));

}  // namespace

TEST(Uq, KdeOfStandardNormal) {
  const Density d = estimate_pdf(normal_samples(4000, 0.0, 1.0, 1));
  double sum = 0.0;
  std::size_t mode = 0;
  for (std::size_t i = 0; i < d.mass.size(); ++i) {
    sum += d.mass[i];
    if (d.mass[i] > d.mass[mode]) mode = i;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(d.support[mode], 0.0, 0.15);
  EXPECT_EQ(d.support.size(), kDefaultPdfPoints);
  EXPECT_NEAR(d.bandwidth, 1.06 * std::pow(4000.0, -0.2), 0.01);
  // Mass per unit length at the mode approximates 1/sqrt(2 pi).
  const double h = d.support[1] - d.support[0];
  EXPECT_NEAR(d.mass[mode] / h, 1.0 / std::sqrt(2.0 * M_PI), 0.02);
}

TEST(Uq, TwoPointSamplesGiveSymmetricDensity) {
  const Density d = estimate_pdf({-1.0, 1.0}, 101);
  EXPECT_NEAR(d.lo(), -d.hi(), 1e-12);
  for (std::size_t i = 0; i < 101; ++i) EXPECT_NEAR(d.mass[i], d.mass[100 - i], 1e-15);
  EXPECT_NEAR(d.bandwidth, 1.06 * std::sqrt(2.0) * std::pow(2.0, -0.2), 1e-12);
}

TEST(Uq, DegenerateSamples) {
  EXPECT_THROW_CODE(estimate_pdf({2.0, 2.0, 2.0}), ErrorCode::DegenerateSamples);
  EXPECT_THROW_CODE(estimate_pdf({2.0}), ErrorCode::DegenerateSamples);
  const Density d = estimate_pdf_or_delta({2.0, 2.0});
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.mass, std::vector<double>{1.0});
  // Tiny spread is floored, not degenerate.
  const Density tight = estimate_pdf({1.0, 1.0 + 1e-13, 1.0});
  EXPECT_FALSE(tight.degenerate);
  EXPECT_GT(tight.bandwidth, 0.0);
}

TEST(Uq, HellingerLimits) {
  const Density p = estimate_pdf(normal_samples(500, 0.0, 1.0, 2));
  EXPECT_EQ(hellinger(p, p), 0.0);
  const Density far = estimate_pdf(normal_samples(500, 100.0, 1.0, 3));
  EXPECT_NEAR(hellinger(p, far), 1.0, 1e-9);
  const Density a = estimate_pdf_or_delta({0.0, 0.0}), b = estimate_pdf_or_delta({5.0, 5.0});
  EXPECT_NEAR(hellinger(a, b), 1.0, 1e-12);
  EXPECT_NEAR(hellinger(a, a), 0.0, 1e-12);
}

TEST(Uq, HellingerOfShiftedGaussians) {
  // Quadrature route on the exact densities.
  const Density p = gaussian_values(0.0, -9.0, 10.0, 4001), q = gaussian_values(1.0, -9.0, 10.0, 4001);
  EXPECT_NEAR(hellinger(p, q), kShiftedGaussianHellinger, 1e-6);
  // KDE route from samples.
  const Density kp = estimate_pdf(normal_samples(20000, 0.0, 1.0, 4));
  const Density kq = estimate_pdf(normal_samples(20000, 1.0, 1.0, 5));
  EXPECT_NEAR(hellinger(kp, kq), kShiftedGaussianHellinger, 0.01);
}

TEST(Uq, HellingerIsSymmetricAndBounded) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> mu(-3.0, 3.0), sd(0.1, 3.0);
  for (int trial = 0; trial < 25; ++trial) {
    const Density p = estimate_pdf(normal_samples(60, mu(rng), sd(rng), rng()), 64);
    const Density q = estimate_pdf(normal_samples(80, mu(rng), sd(rng), rng()), 128);
    const double pq = hellinger(p, q), qp = hellinger(q, p);
    EXPECT_NEAR(pq, qp, 1e-12);
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
  }
}

TEST(Uq, RebinningIsStable) {
  const Density p = estimate_pdf(normal_samples(1000, 0.0, 1.0, 7));
  const Density q = estimate_pdf(normal_samples(1000, 0.5, 1.0, 8));
  const double base = hellinger(p, q);
  EXPECT_NEAR(hellinger(p, q, 1024), base, 5e-3);
  EXPECT_NEAR(hellinger(p, q, 512), base, 5e-3);
  const auto same = rebin(p, p.support);
  for (std::size_t i = 0; i < same.size(); ++i) EXPECT_NEAR(same[i], p.mass[i], 1e-12);
}

TEST(Uq, EnsembleMse) {
  Trajectories truth = {{Tensor({1, 2}, 0.0), Tensor({1, 2}, 1.0), Tensor({1, 2}, 2.0)}};
  EXPECT_EQ(ensemble_mse(truth, truth), 0.0);
  Trajectories pred = truth;
  pred[0][0] = Tensor({1, 2}, 50.0);  // step 0 is not scored
  pred[0][1] = Tensor({1, 2}, 3.0);   // error 2 -> 4
  EXPECT_DOUBLE_EQ(ensemble_mse(pred, truth), 2.0);
  EXPECT_DOUBLE_EQ(ensemble_mse(pred, truth, 1), 4.0);
  pred.push_back(truth[0]);
  EXPECT_THROW_CODE(ensemble_mse(pred, truth), ErrorCode::ShapeMismatch);
}

TEST(Uq, ProbesMapToNearestGridPoint) {
  const PdeSpec s = dpawno::testing::burgers1d(65);  // dx = 1/32
  const Probe p = make_probe(s, 0.25);
  EXPECT_EQ(p.index, 40u);
  EXPECT_DOUBLE_EQ(p.grid_x, 0.25);
  const PdeSpec s2 = dpawno::testing::burgers2d(21);  // dx = 0.1
  const Probe q = make_probe(s2, 1.0, 0.52);
  EXPECT_EQ(q.index, 5u * 21u + 10u);
  Trajectories tr = {{Tensor({1, 65}, 0.0), Tensor({1, 65}, 3.0)}};
  EXPECT_EQ(probe_values(tr, p, 1), std::vector<double>{3.0});
  EXPECT_THROW_CODE(probe_values(tr, p, 2), ErrorCode::InvalidArgument);
}

TEST(Uq, MeanHellingerOfIdenticalEnsembles) {
  std::mt19937_64 rng(9);
  Trajectories tr;
  for (int i = 0; i < 30; ++i) tr.push_back({dpawno::testing::random_tensor({1, 4}, rng), dpawno::testing::random_tensor({1, 4}, rng)});
  const PdeSpec s = dpawno::testing::nagumo(4);
  EXPECT_EQ(mean_hellinger(tr, tr, make_probe(s, 0.5)), 0.0);
}
