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

// Shadow recurrent training: mini-batch backprop epochs against fixed
// shadow codes U, each followed by the closed-form refresh U = sign(B).

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hashlab/cifar.hpp"
#include "hashlab/losses.hpp"
#include "hashlab/network.hpp"
#include "hashlab/sgd.hpp"

namespace hashlab {

/// Elementwise sign with sign(0) = +1: the minimizer of ||U - B||_F^2 over +-1 matrices.
template <class Real>
SignMatrix shadow_update(const Matrix<Real>& B) {
  return B.unaryExpr([](Real v) -> std::int8_t { return v >= Real(0) ? 1 : -1; });
}

enum class Method { kSrh, kDsh, kCauchy };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kSrh: return "srh";
    case Method::kDsh: return "dsh";
    case Method::kCauchy: return "cauchy";
  }
  return "?";
}

/// How the pair term is weighted inside one mini-batch.
enum class PairNormalization {
  kSum,   // plain sum over the M(M-1)/2 pairs
  kMean,  // divided by (M-1): each image sees the average over its partners
};

struct TrainConfig {
  Method method = Method::kSrh;
  int epochs = 150;
  std::size_t batch = 160;
  int k = 12;
  double alpha = 0.01;  // shadow weight (SRH) or |b|-1 regularizer weight (DSH)
  double beta = 0.01;
  std::optional<double> margin;  // defaults to 2k
  double gamma = 1.0;            // Cauchy scale
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.004;
  int lr_step = 0;  // epochs between step decays; 0 keeps the rate constant
  double lr_decay = 0.1;
  double max_grad_norm = 10.0;  // joint L2 clip on each batch gradient; 0 disables
  PairNormalization pair_normalization = PairNormalization::kSum;
  std::uint64_t seed = 1;
  std::vector<LayerSpec> architecture;  // empty selects canonical_architecture(k)

  double effective_margin() const { return margin.value_or(2.0 * k); }

  std::vector<LayerSpec> layers() const {
    return architecture.empty() ? canonical_architecture(static_cast<std::size_t>(k)) : architecture;
  }

  void validate() const {
    if (k <= 0) throw ConfigError("code length k must be positive, got " + std::to_string(k));
    if (epochs < 1) throw ConfigError("number of outer iterations must be at least 1, got " + std::to_string(epochs));
    if (batch < 1) throw ConfigError("batch size must be at least 1");
    if (alpha < 0 || beta < 0) throw ConfigError("alpha and beta must be nonnegative");
    if (!(effective_margin() > 0)) throw ConfigError("margin must be positive");
    if (method == Method::kCauchy && !(gamma > 0)) throw ConfigError("cauchy gamma must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (lr_step < 0) throw ConfigError("lr step must be nonnegative");
    if (!(max_grad_norm >= 0)) throw ConfigError("max gradient norm must be nonnegative");
  }
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double pair = 0.0;
  double shadow = 0.0;
  double norm = 0.0;
};

struct TrainResult {
  Network<float> net;
  SignMatrix shadow;  // one row per training image, entries +-1
  std::vector<EpochStats> trace;
};

/// Real-valued network outputs for every image, evaluated in chunks of `batch`.
inline Matrix<float> encode_outputs(const Network<float>& net, const LabeledImageSet& set, std::size_t batch) {
  Matrix<float> B(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(net.output_width()));
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < set.size(); start += batch) {
    const std::size_t end = std::min(set.size(), start + batch);
    ids.resize(end - start);
    std::iota(ids.begin(), ids.end(), start);
    const auto out = net.predict(set.batch(ids));
    B.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = as_matrix(out);
  }
  return B;
}

/// Loss terms and dL/dB of the configured objective for one mini-batch.
struct BatchObjective {
  SrhLossTerms terms;
  Matrix<float> gradient;
};

inline BatchObjective evaluate_objective(const TrainConfig& cfg, const Matrix<float>& B, const SignMatrix& U,
                                         const PairLabels& labels) {
  const std::size_t m = static_cast<std::size_t>(B.rows());
  const double pair_weight =
      cfg.pair_normalization == PairNormalization::kMean && m > 1 ? 1.0 / static_cast<double>(m - 1) : 1.0;
  BatchObjective out;
  switch (cfg.method) {
    case Method::kSrh: {
      SrhParams p{cfg.k, cfg.effective_margin(), cfg.alpha, cfg.beta, pair_weight};
      out.terms = srh_loss_terms(B, U, labels, p);
      out.gradient = srh_gradient(B, U, labels, p);
      break;
    }
    case Method::kDsh:
      out.terms.pair = pair_weight * dsh_loss(B, labels, cfg.effective_margin(), cfg.alpha);
      out.gradient = static_cast<float>(pair_weight) * dsh_gradient(B, labels, cfg.effective_margin(), cfg.alpha);
      break;
    case Method::kCauchy:
      out.terms.pair = pair_weight * cauchy_pairwise_loss(B, labels, cfg.gamma).value;
      out.gradient = static_cast<float>(pair_weight) * cauchy_gradient(B, labels, cfg.gamma);
      break;
  }
  return out;
}

inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
  if (cfg.lr_step <= 0) return cfg.learning_rate;
  return cfg.learning_rate * std::pow(cfg.lr_decay, (epoch - 1) / cfg.lr_step);
}

using EpochCallback = std::function<void(const EpochStats&)>;

/// Runs the alternating optimization on `data` (labels via `oracle`, indexed like `data`).
///
/// Every epoch visits ceil(N/M) batches of a fresh seeded shuffle; each batch
/// does forward, objective gradient, backprop, a joint gradient-norm clip and
/// one SGD step on the batch mean. After the epoch the shadow codes are refreshed from a full forward pass.
inline TrainResult train(const LabeledImageSet& data, const SimilarityOracle& oracle, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (oracle.size() != data.size())
    throw ConfigError("similarity oracle covers " + std::to_string(oracle.size()) + " images, training set has " +
                      std::to_string(data.size()));
  Shape per_image(data.images.shape().begin() + 1, data.images.shape().end());
  Network<float> net(cfg.layers(), per_image);
  if (net.output_width() != static_cast<std::size_t>(cfg.k))
    throw ConfigError("architecture emits " + std::to_string(net.output_width()) + " outputs, k=" + std::to_string(cfg.k));
  xavier_init(net, cfg.seed);
  OptimizerState<float> opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
  opt.reset(net.parameters());

  const std::size_t n = data.size();
  const std::size_t m = std::min(cfg.batch, n);
  TrainResult result{net, shadow_update(encode_outputs(net, data, m)), {}};
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.learning_rate = learning_rate_at(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats{epoch, 0, 0, 0, 0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += m, ++batches) {
      const std::size_t end = std::min(n, start + m);
      std::span<const std::size_t> ids(order.data() + start, end - start);
      const Tensor<float> out = result.net.forward(data.batch(ids));
      const Matrix<float> B = as_matrix(out);
      SignMatrix U(static_cast<Eigen::Index>(ids.size()), cfg.k);
      for (std::size_t r = 0; r < ids.size(); ++r)
        U.row(static_cast<Eigen::Index>(r)) = result.shadow.row(static_cast<Eigen::Index>(ids[r]));
      const BatchObjective obj = evaluate_objective(cfg, B, U, oracle.pair_labels(ids));
      const double scale = 1.0 / static_cast<double>(ids.size());
      if (!std::isfinite(obj.terms.total()) || !obj.gradient.allFinite())
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1));
      stats.pair += obj.terms.pair * scale;
      stats.shadow += obj.terms.shadow * scale;
      stats.norm += obj.terms.norm * scale;

      Tensor<float> upstream(out.shape());
      as_matrix(upstream) = obj.gradient * static_cast<float>(scale);
      auto grads = result.net.backward(upstream);
      clip_gradient_norm(grads.parameters, cfg.max_grad_norm);
      try {
        sgd_step(opt, result.net.parameters(), grads.parameters);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1));
      }
    }
    result.net.clear_cache();
    stats.pair /= static_cast<double>(batches);
    stats.shadow /= static_cast<double>(batches);
    stats.norm /= static_cast<double>(batches);
    stats.mean_loss = stats.pair + stats.shadow + stats.norm;
    if (cfg.method == Method::kSrh) result.shadow = shadow_update(encode_outputs(result.net, data, m));
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  if (cfg.method != Method::kSrh) result.shadow = shadow_update(encode_outputs(result.net, data, m));
  return result;
}

/// One line per epoch: epoch, mean loss, pair, shadow and norm terms, tab separated.
inline std::string format_trace_line(const EpochStats& s) {
  std::ostringstream os;
  os << s.epoch << '\t' << std::setprecision(9) << s.mean_loss << '\t' << s.pair << '\t' << s.shadow << '\t' << s.norm;
  return os.str();
}

inline void write_loss_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& s : trace) os << format_trace_line(s) << '\n';
}

}  // namespace hashlab
