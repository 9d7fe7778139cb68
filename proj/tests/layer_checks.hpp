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

// Randomized finite-difference gradient checks, shared by the unit and
// acceptance suites.

#pragma once

#include <algorithm>
#include <numeric>
#include <random>

#include "hashlab/hashlab.hpp"
#include "oracles.hpp"

namespace hashlab::testing_support {

struct GradientCheckReport {
  std::size_t cases = 0;
  double max_relative_error = 0.0;
};

/// Analytic vs central-difference gradients (eps 1e-5, double) of
/// f = <upstream, layer(x)> with respect to the input and every parameter.
inline GradientCheckReport check_layer_gradients(LayerKind kind, std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  GradientCheckReport report;
  while (report.cases < cases) {
    const std::size_t batch = pick(1, 3);
    LayerSpec spec;
    Shape in;
    switch (kind) {
      case LayerKind::kConv: {
        const std::size_t k = pick(1, 3);
        spec = LayerSpec::conv(pick(1, 4), k, pick(1, 2), pick(0, k - 1));
        in = {pick(1, 3), pick(k, 7), pick(k, 7)};
        break;
      }
      case LayerKind::kMaxPool: {
        const std::size_t k = pick(2, 3);
        spec = LayerSpec::max_pool(k, pick(1, 2));
        in = {pick(1, 3), pick(k, 7), pick(k, 7)};
        break;
      }
      case LayerKind::kFullyConnected:
        spec = LayerSpec::fully_connected(pick(1, 6));
        in = pick(0, 1) ? Shape{pick(1, 8)} : Shape{pick(1, 2), pick(1, 3), pick(1, 3)};
        break;
      case LayerKind::kRelu:
        spec = LayerSpec::relu();
        in = {pick(1, 3), pick(1, 5), pick(1, 5)};
        break;
      case LayerKind::kTanh:
        spec = LayerSpec::tanh();
        in = {pick(1, 3), pick(1, 5), pick(1, 5)};
        break;
    }
    Network<double> net({spec}, in);
    for (auto& p : net.parameters())
      for (auto& v : p.value.values()) v = unit(rng);

    Shape batch_shape{batch};
    batch_shape.insert(batch_shape.end(), in.begin(), in.end());
    Tensor<double> x(batch_shape);
    if (kind == LayerKind::kMaxPool) {
      // distinct, well separated values so no window has a near tie
      std::vector<double> levels(x.size());
      std::iota(levels.begin(), levels.end(), 0.0);
      std::shuffle(levels.begin(), levels.end(), rng);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = levels[i] * 0.01 - 1.0;
    } else {
      for (auto& v : x.values()) {
        do v = unit(rng);
        while (kind == LayerKind::kRelu && std::abs(v) < 0.05);
      }
    }
    Tensor<double> up({batch, net.output_width()});
    for (auto& v : up.values()) v = unit(rng);

    net.forward(x);
    const auto analytic = net.backward(up);
    auto objective = [&] {
      const auto y = net.predict(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += up[i] * y[i];
      return s;
    };
    const auto fd_input = oracle::central_difference(objective, x.values());
    report.max_relative_error =
        std::max(report.max_relative_error, oracle::relative_error(analytic.input.storage(), fd_input));
    for (std::size_t p = 0; p < net.parameters().size(); ++p) {
      const auto fd = oracle::central_difference(objective, net.parameters()[p].value.values());
      report.max_relative_error =
          std::max(report.max_relative_error, oracle::relative_error(analytic.parameters[p].storage(), fd));
    }
    ++report.cases;
  }
  return report;
}

}  // namespace hashlab::testing_support
