// Copyright 2026 The hashlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "hashlab/hashlab.hpp"
#include "oracles.hpp"
#include "solver_checks.hpp"

namespace hashlab {
namespace {

TEST(AdshObjective, PerfectAgreementIsZero) {
  const int c = 4;
  Matrix<double> Ut = Matrix<double>::Ones(1, c);
  SignMatrix V = SignMatrix::Ones(1, c);
  Matrix<double> S = Matrix<double>::Ones(1, 1);
  EXPECT_EQ(adsh_objective(Ut, V, S, 5.0), 0.0);
}

TEST(AdshObjective, ZeroCodesWithoutRegularizer) {
  const int c = 3;
  Matrix<double> Ut = Matrix<double>::Zero(2, c);
  SignMatrix V = SignMatrix::Ones(5, c);
  Matrix<double> S(2, 5);
  S << 1, -1, 1, -1, -1, -1, -1, 1, 1, 1;
  EXPECT_EQ(adsh_objective(Ut, V, S, 0.0), c * c * 10.0);
}

TEST(AdshObjective, MatchesDoubleLoop) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int m = 3, n = 5, c = 3;
    Matrix<double> Ut(m, c);
    for (Eigen::Index i = 0; i < Ut.size(); ++i) Ut.data()[i] = u(rng);
    SignMatrix V(n, c);
    for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = u(rng) < 0 ? -1 : 1;
    Matrix<double> S(m, n);
    for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng) < 0 ? -1 : 1;
    const std::vector<std::size_t> omega{4, 0, 2};
    const double gamma = 1.3;
    double expected = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int k = 0; k < c; ++k) dot += Ut(i, k) * V(j, k);
        expected += (dot - c * S(i, j)) * (dot - c * S(i, j));
      }
      for (int k = 0; k < c; ++k) {
        const double e = V(static_cast<Eigen::Index>(omega[i]), k) - Ut(i, k);
        expected += gamma * e * e;
      }
    }
    EXPECT_NEAR(adsh_objective(Ut, V, S, gamma, omega), expected, 1e-9);
  }
}

TEST(AdshUpdate, AlignedScalar) {
  Matrix<double> Ut(1, 1);
  Ut << 0.9;
  Matrix<double> S(1, 1);
  S << 1.0;
  SignMatrix V(1, 1);
  V << -1;
  EXPECT_EQ(adsh_update_V(Ut, S, 1.0, V)(0, 0), 1);
}

TEST(AdshUpdate, AntiAlignedFlipsNegative) {
  Matrix<double> Ut = Matrix<double>::Constant(2, 2, 0.7);
  Matrix<double> S = Matrix<double>::Constant(2, 3, -1.0);
  const SignMatrix V = adsh_update_V(Ut, S, 0.0, SignMatrix::Ones(3, 2));
  EXPECT_TRUE((V.array() == -1).all());
}

TEST(AdshUpdate, EveryColumnIsTheConditionalMinimizer) {
  const auto report = testing_support::check_adsh_columns(200, 31);
  EXPECT_EQ(report.column_mismatches, 0u);
  EXPECT_EQ(report.objective_increases, 0u);
  EXPECT_GE(report.columns, 200u);
}

TEST(AdshUpdate, LargeGammaCopiesQuerySigns) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> Ut(4, 3);
  for (Eigen::Index i = 0; i < Ut.size(); ++i) Ut.data()[i] = u(rng);
  Matrix<double> S(4, 7);
  for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng) < 0 ? -1 : 1;
  const std::vector<std::size_t> omega{1, 3, 5, 6};
  const SignMatrix V = adsh_update_V(Ut, S, 1e7, SignMatrix::Ones(7, 3), omega);
  const SignMatrix expected = shadow_update(Ut);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(V.row(static_cast<Eigen::Index>(omega[i])), expected.row(i));
}

TEST(AdshUpdate, RejectsShapeMismatch) {
  Matrix<double> Ut = Matrix<double>::Zero(2, 3);
  Matrix<double> S = Matrix<double>::Zero(2, 4);
  EXPECT_THROW(adsh_update_V(Ut, S, 1.0, SignMatrix::Ones(5, 3)), ConfigError);
  EXPECT_THROW(adsh_update_V(Ut, S, 1.0, SignMatrix::Ones(4, 2)), ConfigError);
}

LabeledImageSet two_class_toy(std::size_t n, std::size_t side) {
  LabeledImageSet set{Tensor<float>({n, 1, side, side}), std::vector<std::uint8_t>(n)};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> jitter(-0.05f, 0.05f);
  for (std::size_t i = 0; i < n; ++i) {
    set.labels[i] = static_cast<std::uint8_t>(i % 2);
    // opposite signs so a bias-free net already sees the classes in different directions
    const float level = i % 2 ? 0.3f : -0.3f;
    for (auto& v : set.images.slice(i)) v = level + jitter(rng);
  }
  return set;
}

std::vector<LayerSpec> toy_architecture(std::size_t c) {
  return {LayerSpec::conv(4, 3, 1, 1), LayerSpec::relu(), LayerSpec::max_pool(2, 2), LayerSpec::fully_connected(c)};
}

TEST(AdshTrain, IdenticalPointsObjectiveDecreases) {
  LabeledImageSet set{Tensor<float>({6, 1, 4, 4}, 0.5f), std::vector<std::uint8_t>(6, 0)};
  AdshConfig cfg;
  cfg.c = 3;
  cfg.gamma = 2.0;
  cfg.queries = 6;
  cfg.batch = 6;
  cfg.outer_iterations = 8;
  cfg.learning_rate = 0.05;
  cfg.architecture = toy_architecture(3);
  const auto result = adsh_train(set, cfg);
  ASSERT_EQ(result.objective_trace.size(), 8u);
  for (std::size_t t = 1; t < result.objective_trace.size(); ++t)
    EXPECT_LE(result.objective_trace[t], result.objective_trace[t - 1] + 1e-9) << "alternation " << t;
  EXPECT_LT(result.objective_trace.back(), result.objective_trace.front());
}

TEST(AdshTrain, SeparatesTwoClasses) {
  const auto set = two_class_toy(24, 6);
  AdshConfig cfg;
  cfg.c = 4;
  cfg.gamma = 10.0;
  cfg.queries = 12;
  cfg.batch = 6;
  cfg.outer_iterations = 10;
  cfg.network_epochs = 5;
  cfg.learning_rate = 0.05;
  cfg.architecture = toy_architecture(4);
  const auto result = adsh_train(set, cfg);
  const PackedCodes codes = binarize_and_pack(encode_outputs(result.net, set, 8));
  const auto [intra, inter] = testing_support::mean_class_distances(codes, set.labels);
  EXPECT_LT(intra, inter);
  EXPECT_EQ(result.query_index.size(), 12u);
  EXPECT_TRUE(std::is_sorted(result.query_index.begin(), result.query_index.end()));
}

TEST(AdshTrain, DeterministicUnderSeed) {
  const auto set = two_class_toy(10, 4);
  AdshConfig cfg;
  cfg.c = 3;
  cfg.queries = 5;
  cfg.batch = 4;
  cfg.outer_iterations = 2;
  cfg.architecture = toy_architecture(3);
  const auto a = adsh_train(set, cfg);
  const auto b = adsh_train(set, cfg);
  EXPECT_EQ(a.V, b.V);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(AdshTrain, RejectsBadConfig) {
  const auto set = two_class_toy(4, 4);
  AdshConfig cfg;
  cfg.c = 0;
  EXPECT_THROW(adsh_train(set, cfg), ConfigError);
}

TEST(Cnnh, SingleClassIsRankOnePerfect) {
  const Matrix<double> S = Matrix<double>::Ones(5, 5);
  const auto r = cnnh_factorize(S, 1, 20, 3);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
  EXPECT_EQ(r.binarized_objective, 0.0);
  EXPECT_TRUE((r.H.array().abs() == 1.0).all());
}

TEST(Cnnh, TwoPointsTwoClasses) {
  Matrix<double> S(2, 2);
  S << 1, -1, -1, 1;
  const auto r = cnnh_factorize(S, 1, 20, 9);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
  EXPECT_EQ(r.codes(0, 0), -r.codes(1, 0));
  EXPECT_NEAR(std::abs(r.H(0, 0)), 1.0, 1e-12);
}

TEST(Cnnh, EveryEntryUpdateIsMonotone) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + rng() % 5);
    const int q = 1 + static_cast<int>(rng() % 3);
    Matrix<double> S(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) S(i, j) = S(j, i) = i == j ? 1.0 : (rng() & 1 ? 1.0 : -1.0);
    double previous = std::numeric_limits<double>::infinity();
    std::size_t updates = 0, increases = 0;
    cnnh_factorize(S, q, 5, rng(), [&](Eigen::Index, Eigen::Index, const Matrix<double>& H) {
      const double v = cnnh_objective(S, H);
      if (v > previous + 1e-12) ++increases;
      previous = v;
      ++updates;
      EXPECT_TRUE((H.array().abs() <= 1.0).all());
    });
    EXPECT_EQ(increases, 0u);
    EXPECT_EQ(updates, static_cast<std::size_t>(5 * n * q));
  }
}

TEST(Cnnh, ColumnSignFlipIsASymmetry) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix<double> S(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = i; j < 5; ++j) S(i, j) = S(j, i) = i == j ? 1.0 : (u(rng) < 0 ? -1.0 : 1.0);
  Matrix<double> H(5, 3);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = u(rng);
  for (Eigen::Index j = 0; j < 3; ++j) {
    Matrix<double> F = H;
    F.col(j) *= -1.0;
    EXPECT_NEAR(cnnh_objective(S, F), cnnh_objective(S, H), 1e-12);
  }
}

TEST(Cnnh, WithinFivePercentOfExhaustiveOptimum) {
  const auto report = testing_support::check_cnnh_against_exhaustive(40, 23);
  EXPECT_EQ(report.failures, 0u) << "worst ratio " << report.worst_gap;
}

TEST(Cnnh, CubicRootsSolveTheCubic) {
  for (double p : {-3.0, -0.5, 0.0, 0.7, 2.0})
    for (double r : {-1.0, 0.0, 0.3, 2.5}) {
      const auto roots = detail::depressed_cubic_roots(p, r);
      ASSERT_FALSE(roots.empty());
      for (double x : roots) EXPECT_NEAR(x * x * x + p * x + r, 0.0, 1e-9) << p << " " << r;
    }
}

TEST(Cnnh, DeterministicAndValidated) {
  Matrix<double> S = Matrix<double>::Ones(3, 3);
  S(0, 2) = S(2, 0) = -1;
  EXPECT_EQ(cnnh_factorize(S, 2, 4, 8).H, cnnh_factorize(S, 2, 4, 8).H);
  EXPECT_THROW(cnnh_factorize(S, 0, 4, 8), ConfigError);
  EXPECT_THROW(cnnh_factorize(Matrix<double>::Ones(2, 3), 1, 4, 8), ConfigError);
}

}  // namespace
}  // namespace hashlab
