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

// Closed-form and coordinate-descent solvers for the comparator methods:
// asymmetric database-code learning (ADSH) and similarity factorization
// S ~ (1/q) H H^T (CNNH stage 1). Similarities use +1 similar / -1 dissimilar.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hashlab/cifar.hpp"
#include "hashlab/network.hpp"
#include "hashlab/sgd.hpp"
#include "hashlab/shadow.hpp"

namespace hashlab {

namespace detail {

inline std::vector<std::size_t> resolve_query_index(std::span<const std::size_t> query_index, Eigen::Index m,
                                                    Eigen::Index n) {
  if (!query_index.empty()) {
    if (static_cast<Eigen::Index>(query_index.size()) != m)
      throw ConfigError("query index has " + std::to_string(query_index.size()) + " entries for " + std::to_string(m) + " queries");
    for (auto id : query_index)
      if (static_cast<Eigen::Index>(id) >= n) throw ConfigError("query index " + std::to_string(id) + " outside database");
    return {query_index.begin(), query_index.end()};
  }
  if (m > n) throw ConfigError("more queries (" + std::to_string(m) + ") than database points (" + std::to_string(n) + ")");
  std::vector<std::size_t> identity(static_cast<std::size_t>(m));
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  return identity;
}

inline void check_adsh_shapes(const Matrix<double>& Ut, Eigen::Index n, Eigen::Index c, const Matrix<double>& S) {
  if (Ut.cols() != c)
    throw ConfigError("query codes have " + std::to_string(Ut.cols()) + " bits, database codes " + std::to_string(c));
  if (S.rows() != Ut.rows() || S.cols() != n)
    throw ConfigError("similarity is " + std::to_string(S.rows()) + "x" + std::to_string(S.cols()) + ", expected " +
                      std::to_string(Ut.rows()) + "x" + std::to_string(n));
}

}  // namespace detail

/// sum_ij (u~_i . v_j - c S_ij)^2 + gamma sum_i ||v_{query_index[i]} - u~_i||^2.
///
/// Ut holds tanh network outputs for the m queries; an empty query_index maps query i to database row i.
inline double adsh_objective(const Matrix<double>& Ut, const SignMatrix& V, const Matrix<double>& S, double gamma,
                             std::span<const std::size_t> query_index = {}) {
  const Eigen::Index c = V.cols();
  detail::check_adsh_shapes(Ut, V.rows(), c, S);
  const auto omega = detail::resolve_query_index(query_index, Ut.rows(), V.rows());
  const Matrix<double> Vd = V.cast<double>();
  const Matrix<double> R = Ut * Vd.transpose() - static_cast<double>(c) * S;
  double reg = 0.0;
  for (Eigen::Index i = 0; i < Ut.rows(); ++i)
    reg += (Vd.row(static_cast<Eigen::Index>(omega[static_cast<std::size_t>(i)])) - Ut.row(i)).squaredNorm();
  return R.squaredNorm() + gamma * reg;
}

/// One sweep of exact column updates V_{*k} = -sign(2 V_k' U_k'^T U_{*k} + Q_{*k}),
/// Q = -2c S^T U~ - 2 gamma U_bar, where U_bar scatters U~ onto the query rows of
/// the database and primes denote "all other columns". Ties resolve to +1.
///
/// Each column is the exact minimizer given the others, so the objective never
/// increases; `column_objectives`, if given, receives the objective after each column.
inline SignMatrix adsh_update_V(const Matrix<double>& Ut, const Matrix<double>& S, double gamma, SignMatrix V,
                                std::span<const std::size_t> query_index = {},
                                std::vector<double>* column_objectives = nullptr) {
  const Eigen::Index n = V.rows();
  const Eigen::Index c = V.cols();
  detail::check_adsh_shapes(Ut, n, c, S);
  const auto omega = detail::resolve_query_index(query_index, Ut.rows(), n);
  Matrix<double> Ubar = Matrix<double>::Zero(n, c);
  for (Eigen::Index i = 0; i < Ut.rows(); ++i) Ubar.row(static_cast<Eigen::Index>(omega[static_cast<std::size_t>(i)])) = Ut.row(i);
  const Matrix<double> Q = -2.0 * static_cast<double>(c) * S.transpose() * Ut - 2.0 * gamma * Ubar;
  const Matrix<double> gram = Ut.transpose() * Ut;
  Matrix<double> Vd = V.cast<double>();
  for (Eigen::Index k = 0; k < c; ++k) {
    Eigen::VectorXd x = Q.col(k);
    for (Eigen::Index l = 0; l < c; ++l)
      if (l != k) x += 2.0 * gram(l, k) * Vd.col(l);
    for (Eigen::Index j = 0; j < n; ++j) {
      Vd(j, k) = x(j) > 0.0 ? -1.0 : 1.0;
      V(j, k) = static_cast<std::int8_t>(Vd(j, k));
    }
    if (column_objectives) column_objectives->push_back(adsh_objective(Ut, V, S, gamma, omega));
  }
  return V;
}

struct AdshConfig {
  int c = 12;
  double gamma = 200.0;
  int outer_iterations = 10;
  int network_epochs = 3;  // backprop epochs on the query network per alternation
  std::size_t queries = 1000;
  std::size_t batch = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.004;
  std::uint64_t seed = 1;
  std::vector<LayerSpec> architecture;  // feature layers ending in fc(c); a tanh head is appended

  void validate() const {
    if (c <= 0) throw ConfigError("code length c must be positive, got " + std::to_string(c));
    if (outer_iterations < 1 || network_epochs < 0) throw ConfigError("ADSH iteration budget must be positive");
    if (gamma < 0) throw ConfigError("gamma must be nonnegative");
    if (queries == 0 || batch == 0) throw ConfigError("ADSH needs at least one query and a positive batch size");
  }
};

struct AdshResult {
  Network<float> net;                    // query network with tanh head
  SignMatrix V;                          // database codes
  std::vector<std::size_t> query_index;  // sampled query rows of the database
  std::vector<double> objective_trace;   // after every V update
};

/// Alternates network training with V fixed and a closed-form V sweep with the network fixed.
inline AdshResult adsh_train(const LabeledImageSet& database, const AdshConfig& cfg,
                             const std::function<void(int, double)>& on_iteration = {}) {
  cfg.validate();
  const std::size_t n = database.size();
  if (n == 0) throw ConfigError("ADSH database is empty");
  const std::size_t m = std::min(cfg.queries, n);
  const int c = cfg.c;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<std::size_t> omega(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(omega.begin(), omega.end());

  std::vector<std::size_t> db_ids(n);
  std::iota(db_ids.begin(), db_ids.end(), std::size_t{0});
  const Matrix<double> S = SimilarityOracle(database.labels).sign_similarity(omega, db_ids);

  auto layers = cfg.architecture.empty() ? canonical_architecture(static_cast<std::size_t>(c)) : cfg.architecture;
  layers.push_back(LayerSpec::tanh());
  Shape per_image(database.images.shape().begin() + 1, database.images.shape().end());
  Network<float> net(std::move(layers), per_image);
  if (net.output_width() != static_cast<std::size_t>(c))
    throw ConfigError("ADSH architecture emits " + std::to_string(net.output_width()) + " outputs, c=" + std::to_string(c));
  xavier_init(net, cfg.seed);
  OptimizerState<float> opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
  opt.reset(net.parameters());

  SignMatrix V(static_cast<Eigen::Index>(n), c);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = coin(rng) ? 1 : -1;

  const LabeledImageSet queries = database.subset(omega);
  AdshResult result{std::move(net), std::move(V), omega, {}};
  std::vector<std::size_t> order(m);
  for (int it = 1; it <= cfg.outer_iterations; ++it) {
    const Matrix<float> Vf = result.V.cast<float>();
    for (int e = 0; e < cfg.network_epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < m; start += cfg.batch) {
        const std::size_t end = std::min(m, start + cfg.batch);
        std::span<const std::size_t> ids(order.data() + start, end - start);
        const Tensor<float> out = result.net.forward(queries.batch(ids));
        const auto U = as_matrix(out);
        Matrix<float> G(U.rows(), U.cols());
        for (Eigen::Index r = 0; r < U.rows(); ++r) {
          const std::size_t q = ids[static_cast<std::size_t>(r)];
          const Eigen::RowVectorXf residual =
              (U.row(r) * Vf.transpose()) - static_cast<float>(c) * S.row(static_cast<Eigen::Index>(q)).cast<float>();
          G.row(r) = 2.0f * residual * Vf +
                     2.0f * static_cast<float>(cfg.gamma) * (U.row(r) - Vf.row(static_cast<Eigen::Index>(omega[q])));
        }
        G /= static_cast<float>(n * ids.size());
        if (!G.allFinite()) throw NumericError("non-finite ADSH gradient at iteration " + std::to_string(it));
        Tensor<float> upstream(out.shape());
        as_matrix(upstream) = G;
        auto grads = result.net.backward(upstream);
        sgd_step(opt, result.net.parameters(), grads.parameters);
      }
    }
    result.net.clear_cache();
    const Matrix<double> Ut = encode_outputs(result.net, queries, cfg.batch).cast<double>();
    result.V = adsh_update_V(Ut, S, cfg.gamma, std::move(result.V), omega);
    result.objective_trace.push_back(adsh_objective(Ut, result.V, S, cfg.gamma, omega));
    if (on_iteration) on_iteration(it, result.objective_trace.back());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Similarity factorization.

/// ||S - (1/q) H H^T||_F^2.
inline double cnnh_objective(const Matrix<double>& S, const Matrix<double>& H) {
  return (S - H * H.transpose() / static_cast<double>(H.cols())).squaredNorm();
}

namespace detail {

/// Real roots of x^3 + p x + r = 0.
inline std::vector<double> depressed_cubic_roots(double p, double r) {
  const double disc = r * r / 4.0 + p * p * p / 27.0;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    return {std::cbrt(-r / 2.0 + s) + std::cbrt(-r / 2.0 - s)};
  }
  if (p == 0.0) return {0.0};
  const double rho = 2.0 * std::sqrt(-p / 3.0);
  const double arg = std::clamp(3.0 * r / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
  const double theta = std::acos(arg) / 3.0;
  std::vector<double> roots;
  for (int t = 0; t < 3; ++t) roots.push_back(rho * std::cos(theta - 2.0 * std::numbers::pi * t / 3.0));
  return roots;
}

}  // namespace detail

struct CnnhResult {
  Matrix<double> H;    // relaxed codes in [-1, 1]
  SignMatrix codes;    // sign(H), sign(0) = +1
  double objective = 0.0;
  double binarized_objective = 0.0;
};

using CnnhObserver = std::function<void(Eigen::Index, Eigen::Index, const Matrix<double>&)>;

/// Cyclic coordinate descent: every H_ij in turn is set to the exact minimizer of the
/// objective over [-1, 1] with all other entries fixed (a quartic in H_ij).
inline CnnhResult cnnh_factorize(const Matrix<double>& S, int q, int sweeps, std::uint64_t seed,
                                 const CnnhObserver& observer = {}) {
  if (q < 1) throw ConfigError("factorization needs q >= 1 bits, got " + std::to_string(q));
  if (S.rows() != S.cols()) throw ConfigError("similarity matrix must be square");
  if (sweeps < 0) throw ConfigError("sweep count must be nonnegative");
  const Eigen::Index n = S.rows();
  const double qd = static_cast<double>(q);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-1.0, 1.0);
  Matrix<double> H(n, q);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = init(rng);

  std::vector<double> residual(static_cast<std::size_t>(n));
  for (int sweep = 0; sweep < sweeps; ++sweep)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < q; ++j) {
        // Objective as a function of x = H_ij, up to a constant:
        //   f(x) = 2 sum_{l!=i} (r_l - x H_lj / q)^2 + (d - x^2 / q)^2
        double col_sq = 0.0, col_dot_r = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) {
          if (l == i) continue;
          const double a = H.row(i).dot(H.row(l)) - H(i, j) * H(l, j);
          residual[static_cast<std::size_t>(l)] = 0.5 * (S(i, l) + S(l, i)) - a / qd;
          col_sq += H(l, j) * H(l, j);
          col_dot_r += H(l, j) * residual[static_cast<std::size_t>(l)];
        }
        const double d = S(i, i) - (H.row(i).squaredNorm() - H(i, j) * H(i, j)) / qd;
        auto f = [&](double x) {
          double v = 0.0;
          for (Eigen::Index l = 0; l < n; ++l) {
            if (l == i) continue;
            const double e = residual[static_cast<std::size_t>(l)] - x * H(l, j) / qd;
            v += 2.0 * e * e;
          }
          const double e = d - x * x / qd;
          return v + e * e;
        };
        // f'(x) = 0  <=>  x^3 + (sum H_lj^2 - q d) x - q sum H_lj r_l = 0
        std::vector<double> candidates = detail::depressed_cubic_roots(col_sq - qd * d, -qd * col_dot_r);
        candidates.push_back(-1.0);
        candidates.push_back(1.0);
        double best = H(i, j);
        double best_value = f(best);
        for (double x : candidates) {
          x = std::clamp(x, -1.0, 1.0);
          const double v = f(x);
          if (v < best_value) {
            best = x;
            best_value = v;
          }
        }
        H(i, j) = best;
        if (observer) observer(i, j, H);
      }

  CnnhResult result;
  result.codes = shadow_update(H);
  result.H = std::move(H);
  result.objective = cnnh_objective(S, result.H);
  result.binarized_objective = cnnh_objective(S, result.codes.cast<double>());
  return result;
}

}  // namespace hashlab
