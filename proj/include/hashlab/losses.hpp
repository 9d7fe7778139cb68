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

// Pairwise hashing objectives over all unordered pairs of a mini-batch.
// Pairs are visited in lexicographic (i, j), i < j, order so sums are
// reproducible bit for bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "hashlab/tensor.hpp"

namespace hashlab {

/// y(i,j) = 0 for a similar pair, 1 for a dissimilar one. Diagonal is ignored.
struct PairLabels {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y;

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.rows()); }
  bool dissimilar(std::size_t i, std::size_t j) const { return y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0; }

  template <class Label>
  static PairLabels from_classes(std::span<const Label> classes) {
    PairLabels p;
    const auto n = static_cast<Eigen::Index>(classes.size());
    p.y.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) p.y(i, j) = classes[i] == classes[j] ? 0 : 1;
    return p;
  }
};

inline std::size_t pair_count(std::size_t batch) noexcept { return batch < 2 ? 0 : batch * (batch - 1) / 2; }

struct SrhParams {
  int k = 12;
  double margin = 24.0;
  double alpha = 0.01;
  double beta = 0.01;
  /// Multiplies the pair term; 1 reproduces the plain sum over pairs.
  double pair_weight = 1.0;

  static SrhParams for_bits(int k, double alpha, double beta) {
    return {k, 2.0 * k, alpha, beta, 1.0};
  }
};

struct SrhLossTerms {
  double pair = 0.0;
  double shadow = 0.0;
  double norm = 0.0;
  double total() const noexcept { return pair + shadow + norm; }
};

namespace detail {

template <class Real>
void check_codes(const Matrix<Real>& B, const SignMatrix& U, const PairLabels& labels, int k) {
  if (B.cols() != k) throw ConfigError("code batch has " + std::to_string(B.cols()) + " columns, expected k=" + std::to_string(k));
  if (U.rows() != B.rows() || U.cols() != B.cols())
    throw ConfigError("shadow rows (" + std::to_string(U.rows()) + "x" + std::to_string(U.cols()) +
                      ") do not match code batch (" + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) + ")");
  if (static_cast<Eigen::Index>(labels.size()) != B.rows())
    throw ConfigError("pair labels cover " + std::to_string(labels.size()) + " images, batch has " + std::to_string(B.rows()));
  for (Eigen::Index i = 0; i < U.size(); ++i)
    if (U.data()[i] != 1 && U.data()[i] != -1)
      throw ContractError("shadow code entry " + std::to_string(i) + " is " + std::to_string(int(U.data()[i])) + ", expected +-1");
}

template <class Real>
Real squared_distance(const Matrix<Real>& B, Eigen::Index i, Eigen::Index j) {
  return (B.row(i) - B.row(j)).squaredNorm();
}

}  // namespace detail

/// SRH objective: contrastive pair term + (alpha/2) sum ||b-u||^2 + (beta/2) sum (||b||^2 - k)^2.
template <class Real>
SrhLossTerms srh_loss_terms(const Matrix<Real>& B, const SignMatrix& U, const PairLabels& labels, const SrhParams& p) {
  detail::check_codes(B, U, labels, p.k);
  const Eigen::Index n = B.rows();
  SrhLossTerms t;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = static_cast<double>(detail::squared_distance(B, i, j));
      t.pair += labels.dissimilar(i, j) ? 0.5 * std::max(p.margin - d2, 0.0) : 0.5 * d2;
    }
  t.pair *= p.pair_weight;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shadow = static_cast<double>((B.row(i) - U.row(i).template cast<Real>()).squaredNorm());
    const double excess = static_cast<double>(B.row(i).squaredNorm()) - p.k;
    t.shadow += 0.5 * p.alpha * shadow;
    t.norm += 0.5 * p.beta * excess * excess;
  }
  return t;
}

template <class Real>
double srh_loss(const Matrix<Real>& B, const SignMatrix& U, const PairLabels& labels, const SrhParams& p) {
  return srh_loss_terms(B, U, labels, p).total();
}

/// Analytic dL/dB of srh_loss. The hinge is inactive at ||b_i-b_j||^2 == m.
template <class Real>
Matrix<Real> srh_gradient(const Matrix<Real>& B, const SignMatrix& U, const PairLabels& labels, const SrhParams& p) {
  detail::check_codes(B, U, labels, p.k);
  const Eigen::Index n = B.rows();
  Matrix<Real> G = Matrix<Real>::Zero(n, B.cols());
  const Real w = static_cast<Real>(p.pair_weight);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Real coeff;
      if (!labels.dissimilar(i, j)) {
        coeff = w;
      } else {
        const Real d2 = detail::squared_distance(B, i, j);
        if (!(d2 < static_cast<Real>(p.margin))) continue;
        coeff = -w;
      }
      const auto diff = (B.row(i) - B.row(j)).eval();
      G.row(i) += coeff * diff;
      G.row(j) -= coeff * diff;
    }
  const Real alpha = static_cast<Real>(p.alpha);
  const Real beta = static_cast<Real>(p.beta);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real excess = B.row(i).squaredNorm() - static_cast<Real>(p.k);
    G.row(i) += alpha * (B.row(i) - U.row(i).template cast<Real>()) + Real(2) * beta * excess * B.row(i);
  }
  return G;
}

/// DSH relaxed objective with the L1 |b|-1 regularizer, summed over every pair.
template <class Real>
double dsh_loss(const Matrix<Real>& B, const PairLabels& labels, double margin, double alpha) {
  if (static_cast<Eigen::Index>(labels.size()) != B.rows())
    throw ConfigError("pair labels cover " + std::to_string(labels.size()) + " images, batch has " + std::to_string(B.rows()));
  const Eigen::Index n = B.rows();
  auto reg = [&](Eigen::Index i) { return static_cast<double>((B.row(i).array().abs() - Real(1)).abs().sum()); };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = static_cast<double>(detail::squared_distance(B, i, j));
      loss += labels.dissimilar(i, j) ? 0.5 * std::max(margin - d2, 0.0) : 0.5 * d2;
      loss += alpha * (reg(i) + reg(j));
    }
  return loss;
}

/// Subgradient of dsh_loss; d/dx ||x|-1| is taken as sign(|x|-1)*sign(x) with sign(0)=0.
template <class Real>
Matrix<Real> dsh_gradient(const Matrix<Real>& B, const PairLabels& labels, double margin, double alpha) {
  const Eigen::Index n = B.rows();
  Matrix<Real> G = Matrix<Real>::Zero(n, B.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Real coeff;
      if (!labels.dissimilar(i, j)) {
        coeff = Real(1);
      } else {
        if (!(detail::squared_distance(B, i, j) < static_cast<Real>(margin))) continue;
        coeff = Real(-1);
      }
      const auto diff = (B.row(i) - B.row(j)).eval();
      G.row(i) += coeff * diff;
      G.row(j) -= coeff * diff;
    }
  // Each code appears in (n-1) pairs, each carrying its own regularizer copy.
  const Real reg_scale = static_cast<Real>(alpha) * static_cast<Real>(n - 1);
  auto sgn = [](Real x) { return static_cast<Real>((x > 0) - (x < 0)); };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < B.cols(); ++c) {
      const Real x = B(i, c);
      G(i, c) += reg_scale * sgn(std::abs(x) - Real(1)) * sgn(x);
    }
  return G;
}

/// Cauchy probability gamma / (gamma + d).
inline double cauchy_probability(double d, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("cauchy gamma must be positive, got " + std::to_string(gamma));
  if (d < 0.0) throw ContractError("cauchy distance must be nonnegative, got " + std::to_string(d));
  return gamma / (gamma + d);
}

inline constexpr double kProbabilityClamp = 1e-12;

struct CauchyLoss {
  double value = 0.0;
  std::size_t clamped_pairs = 0;  // pairs whose likelihood hit the clamp
};

/// Distance surrogate d = ||b_i - b_j||^2 / 4 (Hamming distance for +-1 codes).
template <class Real>
double cauchy_distance(const Matrix<Real>& B, Eigen::Index i, Eigen::Index j) {
  return 0.25 * static_cast<double>(detail::squared_distance(B, i, j));
}

/// Negative weighted log-likelihood with s = 1 for similar pairs. Empty weights mean omega = 1.
template <class Real>
CauchyLoss cauchy_pairwise_loss(const Matrix<Real>& B, const PairLabels& labels, double gamma,
                                const Matrix<double>& weights = {}) {
  if (static_cast<Eigen::Index>(labels.size()) != B.rows())
    throw ConfigError("pair labels cover " + std::to_string(labels.size()) + " images, batch has " + std::to_string(B.rows()));
  const Eigen::Index n = B.rows();
  const bool weighted = weights.size() != 0;
  CauchyLoss out;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double sigma = cauchy_probability(cauchy_distance(B, i, j), gamma);
      double p = labels.dissimilar(i, j) ? 1.0 - sigma : sigma;
      if (p < kProbabilityClamp) {
        p = kProbabilityClamp;
        ++out.clamped_pairs;
      }
      out.value += (weighted ? weights(i, j) : 1.0) * -std::log(p);
    }
  return out;
}

template <class Real>
Matrix<Real> cauchy_gradient(const Matrix<Real>& B, const PairLabels& labels, double gamma,
                             const Matrix<double>& weights = {}) {
  const Eigen::Index n = B.rows();
  const bool weighted = weights.size() != 0;
  // Smallest d at which 1 - sigma stays above the clamp. Inside the clamp the
  // slope is taken at d_floor instead of zero so near-coincident dissimilar
  // pairs keep being pushed apart.
  const double d_floor = gamma * kProbabilityClamp / (1.0 - kProbabilityClamp);
  Matrix<Real> G = Matrix<Real>::Zero(n, B.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = cauchy_distance(B, i, j);
      double dloss_dd = 1.0 / (gamma + d);
      if (labels.dissimilar(i, j)) dloss_dd -= 1.0 / std::max(d, d_floor);
      dloss_dd *= weighted ? weights(i, j) : 1.0;
      // dd/db_i = (b_i - b_j) / 2
      const auto diff = (B.row(i) - B.row(j)).eval();
      const Real c = static_cast<Real>(0.5 * dloss_dd);
      G.row(i) += c * diff;
      G.row(j) -= c * diff;
    }
  return G;
}

}  // namespace hashlab
