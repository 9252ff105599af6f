#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "dpawno/error.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/tensor.hpp"

#define EXPECT_THROW_CODE(stmt, expected_code)                                   \
  do {                                                                           \
    try {                                                                        \
      (void)(stmt);                                                              \
      ADD_FAILURE() << "expected " << dpawno::to_string(expected_code);          \
    } catch (const dpawno::Error& e) {                                           \
      EXPECT_EQ(e.code(), expected_code) << e.what();                            \
    }                                                                            \
  } while (0)

namespace dpawno::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dpawno_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline PdeSpec burgers1d(std::size_t nx = 64, double nu = 0.3 / M_PI, double dt = 3e-4) {
  PdeSpec s;
  s.benchmark = Benchmark::burgers1d;
  s.diffusivity = nu;
  s.terms = full_terms(s.benchmark);
  s.bc = BcKind::dirichlet;
  s.x_min = -1.0;
  s.x_max = 1.0;
  s.nx = nx;
  s.dt = dt;
  return s;
}

inline PdeSpec nagumo(std::size_t nx = 64) {
  PdeSpec s;
  s.benchmark = Benchmark::nagumo;
  s.diffusivity = 0.2;
  s.alpha_speed = -0.5;
  s.terms = full_terms(s.benchmark);
  s.bc = BcKind::periodic;
  s.x_min = 0.0;
  s.x_max = 1.0;
  s.nx = nx;
  s.dt = 1e-4;
  return s;
}

inline PdeSpec allen_cahn(std::size_t nx = 112) {
  PdeSpec s;
  s.benchmark = Benchmark::allen_cahn;
  s.diffusivity = 0.2;
  s.terms = full_terms(s.benchmark);
  s.bc = BcKind::periodic;
  s.x_min = -1.0;
  s.x_max = 1.0;
  s.nx = nx;
  s.dt = 3e-4;
  return s;
}

inline PdeSpec burgers2d(std::size_t n = 16) {
  PdeSpec s;
  s.benchmark = Benchmark::burgers2d;
  s.diffusivity = 0.1 / M_PI;
  s.terms = full_terms(s.benchmark);
  s.bc = BcKind::dirichlet;
  s.bc_value = 1.0;
  s.x_min = s.y_min = 0.0;
  s.x_max = s.y_max = 2.0;
  s.nx = s.ny = n;
  s.dt = 0.01;
  return s;
}

}  // namespace dpawno::testing
