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

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hashlab/network.hpp"

namespace hashlab {

/// Momentum SGD with L2 weight decay on weights (biases are not decayed).
template <class Real>
struct OptimizerState {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.004;
  std::vector<Tensor<Real>> velocity;

  OptimizerState() = default;
  OptimizerState(double lr, double mom, double decay) : learning_rate(lr), momentum(mom), weight_decay(decay) {}

  void reset(const std::vector<Parameter<Real>>& params) {
    velocity.clear();
    for (const auto& p : params) velocity.emplace_back(p.value.shape());
  }
};

/// v <- momentum*v - lr*(grad + decay*param);  param <- param + v.
///
/// Throws NumericError without touching anything if a gradient is not finite.
template <class Real>
void sgd_step(OptimizerState<Real>& state, std::vector<Parameter<Real>>& params,
              const std::vector<Tensor<Real>>& grads) {
  if (grads.size() != params.size())
    throw ConfigError("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                      std::to_string(params.size()) + " parameters");
  if (state.velocity.size() != params.size()) state.reset(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].value.shape())
      throw ConfigError("sgd_step: gradient shape " + shape_string(grads[i].shape()) + " for parameter " +
                        params[i].name + " of shape " + shape_string(params[i].value.shape()));
    if (!grads[i].all_finite()) throw NumericError("sgd_step: non-finite gradient for " + params[i].name);
  }
  const Real lr = static_cast<Real>(state.learning_rate);
  const Real mu = static_cast<Real>(state.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Real decay = params[i].is_weight ? static_cast<Real>(state.weight_decay) : Real(0);
    auto& p = params[i].value;
    auto& v = state.velocity[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = mu * v[j] - lr * (g[j] + decay * p[j]);
      p[j] += v[j];
    }
  }
}

/// Rescales all gradients together so their joint L2 norm is at most `max_norm`.
/// Returns the norm before rescaling; max_norm <= 0 leaves the gradients alone.
template <class Real>
double clip_gradient_norm(std::vector<Tensor<Real>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (const Real v : g.values()) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const auto scale = static_cast<Real>(max_norm / norm);
    for (auto& g : grads)
      for (auto& v : g.values()) v *= scale;
  }
  return norm;
}

}  // namespace hashlab
