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

// Exhaustive checks of the discrete solvers against brute-force enumeration.

#pragma once

#include <limits>
#include <random>
#include <utility>

#include "hashlab/hashlab.hpp"
#include "oracles.hpp"

namespace hashlab::testing_support {

struct AdshColumnReport {
  std::size_t columns = 0;
  std::size_t column_mismatches = 0;
  std::size_t objective_increases = 0;
};

/// For random n <= 6, c <= 3, m <= 4 instances: column k of the sweep result must attain the
/// brute-force minimum over all 2^n columns given columns < k from the result and columns > k
/// from the input, and the objective may not rise after any column.
inline AdshColumnReport check_adsh_columns(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AdshColumnReport report;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto n = static_cast<Eigen::Index>(1 + rng() % 6);
    const auto c = static_cast<Eigen::Index>(1 + rng() % 3);
    const auto m = static_cast<Eigen::Index>(1 + rng() % std::min<std::uint64_t>(4, static_cast<std::uint64_t>(n)));
    Matrix<double> Ut(m, c);
    for (Eigen::Index i = 0; i < Ut.size(); ++i) Ut.data()[i] = u(rng);
    Matrix<double> S(m, n);
    for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = u(rng) < 0 ? -1.0 : 1.0;
    std::vector<std::size_t> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<std::size_t>(m));
    SignMatrix V0(n, c);
    for (Eigen::Index i = 0; i < V0.size(); ++i) V0.data()[i] = u(rng) < 0 ? -1 : 1;
    const double gamma = t % 3 == 0 ? 0.0 : 3.0 * (u(rng) + 1.0);

    std::vector<double> after;
    const SignMatrix V = adsh_update_V(Ut, S, gamma, V0, ids, &after);
    double previous = adsh_objective(Ut, V0, S, gamma, ids);
    for (Eigen::Index k = 0; k < c; ++k) {
      SignMatrix state = V0;
      state.leftCols(k) = V.leftCols(k);
      double best = std::numeric_limits<double>::infinity();
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        for (Eigen::Index j = 0; j < n; ++j) state(j, k) = (mask >> j) & 1u ? 1 : -1;
        best = std::min(best, adsh_objective(Ut, state, S, gamma, ids));
      }
      state.col(k) = V.col(k);
      const double got = adsh_objective(Ut, state, S, gamma, ids);
      if (got > best + 1e-9 * std::max(1.0, best)) ++report.column_mismatches;
      if (after[static_cast<std::size_t>(k)] > previous + 1e-9 * std::max(1.0, previous)) ++report.objective_increases;
      previous = after[static_cast<std::size_t>(k)];
      ++report.columns;
    }
  }
  return report;
}

/// Two-class block similarity (+1 within a class, -1 across).
inline Matrix<double> block_similarity(std::span<const int> classes) {
  const auto n = static_cast<Eigen::Index>(classes.size());
  Matrix<double> S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) S(i, j) = classes[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
  return S;
}

struct CnnhExhaustiveReport {
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst_gap = 0.0;  // max (found - best) / max(best, 1)
};

/// Random 2-class block similarities with n <= 6, q <= 2: the binarized factorization objective
/// must lie within `slack` (relative) of the exhaustive optimum over {+-1}^{n x q}.
inline CnnhExhaustiveReport check_cnnh_against_exhaustive(std::size_t instances, std::uint64_t seed, double slack = 0.05) {
  std::mt19937_64 rng(seed);
  CnnhExhaustiveReport report;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + rng() % 5);
    const int q = 1 + static_cast<int>(rng() % 2);
    std::vector<int> classes(static_cast<std::size_t>(n));
    for (auto& c : classes) c = static_cast<int>(rng() % 2);
    const Matrix<double> S = block_similarity(classes);
    double best = std::numeric_limits<double>::infinity();
    oracle::for_each_sign_matrix(n, q, [&](const SignMatrix& H) {
      best = std::min(best, (S - H.cast<double>() * H.cast<double>().transpose() / static_cast<double>(q)).squaredNorm());
    });
    const auto result = cnnh_factorize(S, q, 50, rng());
    const double gap = (result.binarized_objective - best) / std::max(best, 1.0);
    report.worst_gap = std::max(report.worst_gap, gap);
    if (result.binarized_objective > (1.0 + slack) * best + 1e-12) ++report.failures;
    ++report.instances;
  }
  return report;
}

/// Mean Hamming distance over same-label and different-label pairs.
inline std::pair<double, double> mean_class_distances(const PackedCodes& codes, std::span<const std::uint8_t> labels) {
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (std::size_t j = i + 1; j < codes.size(); ++j) {
      const int d = hamming(codes.code(i), codes.code(j));
      if (labels[i] == labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0, n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

}  // namespace hashlab::testing_support
