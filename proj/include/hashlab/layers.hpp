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

// Per-image layer kernels. Every kernel works on one image (C,H,W) laid out
// row-major; the network drives the batch loop in image order.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hashlab/tensor.hpp"

namespace hashlab {

enum class LayerKind : int {
  kConv = 0,
  kMaxPool = 1,
  kRelu = 2,
  kTanh = 3,
  kFullyConnected = 4,
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t filters = 0;  // conv output channels
  std::size_t window = 0;   // conv kernel / pool window (square)
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t outputs = 0;  // fully-connected width

  static LayerSpec conv(std::size_t filters, std::size_t window, std::size_t stride, std::size_t pad) {
    return {LayerKind::kConv, filters, window, stride, pad, 0};
  }
  static LayerSpec max_pool(std::size_t window, std::size_t stride) {
    return {LayerKind::kMaxPool, 0, window, stride, 0, 0};
  }
  static LayerSpec relu() { return {LayerKind::kRelu, 0, 0, 1, 0, 0}; }
  static LayerSpec tanh() { return {LayerKind::kTanh, 0, 0, 1, 0, 0}; }
  static LayerSpec fully_connected(std::size_t outputs) {
    return {LayerKind::kFullyConnected, 0, 0, 1, 0, outputs};
  }

  bool has_parameters() const noexcept {
    return kind == LayerKind::kConv || kind == LayerKind::kFullyConnected;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline std::string to_string(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::kConv:
      return "conv(" + std::to_string(s.filters) + "," + std::to_string(s.window) + "x" +
             std::to_string(s.window) + ",stride " + std::to_string(s.stride) + ",pad " +
             std::to_string(s.pad) + ")";
    case LayerKind::kMaxPool:
      return "maxpool(" + std::to_string(s.window) + "x" + std::to_string(s.window) + ",stride " +
             std::to_string(s.stride) + ")";
    case LayerKind::kRelu:
      return "relu";
    case LayerKind::kTanh:
      return "tanh";
    case LayerKind::kFullyConnected:
      return "fc(" + std::to_string(s.outputs) + ")";
  }
  return "unknown";
}

/// conv(32,5x5,1,2) -> pool(3x3,2) -> conv(32) -> pool -> conv(64) -> pool -> fc(500) -> relu -> fc(k).
/// ReLU follows every conv and the first fc; the code layer is linear.
inline std::vector<LayerSpec> canonical_architecture(std::size_t code_bits) {
  return {
      LayerSpec::conv(32, 5, 1, 2), LayerSpec::relu(), LayerSpec::max_pool(3, 2),
      LayerSpec::conv(32, 5, 1, 2), LayerSpec::relu(), LayerSpec::max_pool(3, 2),
      LayerSpec::conv(64, 5, 1, 2), LayerSpec::relu(), LayerSpec::max_pool(3, 2),
      LayerSpec::fully_connected(500), LayerSpec::relu(),
      LayerSpec::fully_connected(code_bits),
  };
}

/// Canonical input: 3 channels of 32x32.
inline Shape canonical_input_shape() { return {3, 32, 32}; }

namespace kernels {

inline std::size_t conv_output_extent(std::size_t in, const LayerSpec& s) {
  if (in + 2 * s.pad < s.window) return 0;
  return (in + 2 * s.pad - s.window) / s.stride + 1;
}

/// Ceil-mode pooling extent; windows are clipped at the bottom/right border.
inline std::size_t pool_output_extent(std::size_t in, const LayerSpec& s) {
  if (in < s.window) return 0;
  return (in - s.window + s.stride - 1) / s.stride + 1;
}

/// Unfolds one (C,H,W) image into a (C*K*K) x (Ho*Wo) column matrix.
template <class Real>
void im2col(std::span<const Real> image, std::size_t channels, std::size_t height, std::size_t width,
            const LayerSpec& s, std::size_t out_h, std::size_t out_w, std::span<Real> cols) {
  const std::size_t k = s.window;
  const std::size_t plane = out_h * out_w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const Real* src = image.data() + c * height * width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj, ++row) {
        Real* dst = cols.data() + row * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ki) - static_cast<std::ptrdiff_t>(s.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst + oy * out_w, dst + (oy + 1) * out_w, Real(0));
            continue;
          }
          const Real* src_row = src + static_cast<std::size_t>(iy) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kj) - static_cast<std::ptrdiff_t>(s.pad);
            dst[oy * out_w + ox] =
                (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? Real(0) : src_row[ix];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters column gradients back onto the image gradient.
template <class Real>
void col2im(std::span<const Real> cols, std::size_t channels, std::size_t height, std::size_t width,
            const LayerSpec& s, std::size_t out_h, std::size_t out_w, std::span<Real> image) {
  const std::size_t k = s.window;
  const std::size_t plane = out_h * out_w;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    Real* dst = image.data() + c * height * width;
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj, ++row) {
        const Real* src = cols.data() + row * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ki) - static_cast<std::ptrdiff_t>(s.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          Real* dst_row = dst + static_cast<std::size_t>(iy) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kj) - static_cast<std::ptrdiff_t>(s.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
            dst_row[ix] += src[oy * out_w + ox];
          }
        }
      }
    }
  }
}

/// Max pooling on one image; records the flat argmax of each window (first maximum in row-major order).
template <class Real>
void max_pool_forward(std::span<const Real> in, std::size_t channels, std::size_t height, std::size_t width,
                      const LayerSpec& s, std::size_t out_h, std::size_t out_w, std::span<Real> out,
                      std::span<std::int32_t> argmax) {
  for (std::size_t c = 0; c < channels; ++c) {
    const Real* plane = in.data() + c * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const std::size_t y0 = oy * s.stride;
      const std::size_t y1 = std::min(y0 + s.window, height);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const std::size_t x0 = ox * s.stride;
        const std::size_t x1 = std::min(x0 + s.window, width);
        Real best = -std::numeric_limits<Real>::infinity();
        std::size_t best_at = y0 * width + x0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x)
            if (plane[y * width + x] > best) {
              best = plane[y * width + x];
              best_at = y * width + x;
            }
        const std::size_t o = (c * out_h + oy) * out_w + ox;
        out[o] = best;
        argmax[o] = static_cast<std::int32_t>(c * height * width + best_at);
      }
    }
  }
}

template <class Real>
void max_pool_backward(std::span<const Real> upstream, std::span<const std::int32_t> argmax,
                       std::span<Real> grad_in) {
  for (std::size_t o = 0; o < upstream.size(); ++o) grad_in[static_cast<std::size_t>(argmax[o])] += upstream[o];
}

}  // namespace kernels
}  // namespace hashlab
