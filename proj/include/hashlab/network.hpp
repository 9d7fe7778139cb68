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
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hashlab/layers.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

template <class Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  std::size_t layer = 0;
  bool is_weight = true;  // weight decay applies to weights only
};

template <class Real>
struct Gradients {
  std::vector<Tensor<Real>> parameters;  // aligned with Network::parameters()
  Tensor<Real> input;
};

/// Fixed-topology feed-forward network with cached activations for backprop.
///
/// The network owns its parameters. forward() records the activations of
/// the batch so that a subsequent backward() can run; predict() evaluates
/// without touching the cache.
template <class Real>
class Network {
 public:
  Network(std::vector<LayerSpec> layers, Shape input_shape)
      : layers_(std::move(layers)), input_shape_(std::move(input_shape)) {
    if (layers_.empty()) throw ConfigError("network has no layers");
    if (input_shape_.size() != 3 && input_shape_.size() != 1)
      throw ConfigError("network input must be (C,H,W) or (features), got " + shape_string(input_shape_));
    Shape current = input_shape_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      shapes_.push_back(current);
      current = infer_output(l, current);
    }
    shapes_.push_back(current);
  }

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  /// Per-image shape entering layer l (l == layers().size() gives the output shape).
  const Shape& activation_shape(std::size_t l) const { return shapes_.at(l); }
  /// Features per image; the final activation is flattened row-major.
  std::size_t output_width() const noexcept { return shape_size(shapes_.back()); }

  std::vector<Parameter<Real>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<Real>>& parameters() const noexcept { return params_; }

  /// Index into parameters() of the weight of layer l, if it has one.
  std::optional<std::size_t> weight_index(std::size_t l) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].layer == l && params_[i].is_weight) return i;
    return std::nullopt;
  }

  Tensor<Real> forward(const Tensor<Real>& batch) {
    check_batch(batch);
    cache_.clear();
    argmax_.assign(layers_.size(), {});
    cache_.reserve(layers_.size() + 1);
    cache_.push_back(batch);
    for (std::size_t l = 0; l < layers_.size(); ++l)
      cache_.push_back(apply(l, cache_.back(), &argmax_[l]));
    has_cache_ = true;
    return flatten(cache_.back());
  }

  Tensor<Real> predict(const Tensor<Real>& batch) const {
    check_batch(batch);
    Tensor<Real> x = batch;
    for (std::size_t l = 0; l < layers_.size(); ++l) x = apply(l, x, nullptr);
    return flatten(std::move(x));
  }

  Gradients<Real> backward(const Tensor<Real>& upstream) {
    if (!has_cache_) throw StateError("backward called before forward");
    const std::size_t batch = cache_.front().dim(0);
    if (upstream.rank() != 2 || upstream.dim(0) != batch || upstream.dim(1) != output_width())
      throw ConfigError("upstream gradient shape " + shape_string(upstream.shape()) +
                        " does not match network output (" + std::to_string(batch) + "," +
                        std::to_string(output_width()) + ")");
    Gradients<Real> grads;
    for (const auto& p : params_) grads.parameters.emplace_back(p.value.shape());
    Tensor<Real> g(cache_.back().shape(), upstream.storage());
    for (std::size_t l = layers_.size(); l-- > 0;) g = backprop(l, g, grads);
    grads.input = std::move(g);
    return grads;
  }

  void clear_cache() {
    cache_.clear();
    argmax_.clear();
    has_cache_ = false;
  }

 private:
  Shape infer_output(std::size_t l, const Shape& in) {
    const LayerSpec& s = layers_[l];
    const std::string where = "layer " + std::to_string(l) + " " + to_string(s);
    switch (s.kind) {
      case LayerKind::kConv: {
        if (in.size() != 3) throw ConfigError(where + ": expects (C,H,W) input, got " + shape_string(in));
        if (s.filters == 0 || s.window == 0 || s.stride == 0)
          throw ConfigError(where + ": filters, window and stride must be positive");
        const auto oh = kernels::conv_output_extent(in[1], s);
        const auto ow = kernels::conv_output_extent(in[2], s);
        if (oh == 0 || ow == 0) throw ConfigError(where + ": window larger than padded input " + shape_string(in));
        add_parameter(l, "weight", {s.filters, in[0], s.window, s.window}, true);
        add_parameter(l, "bias", {s.filters}, false);
        return {s.filters, oh, ow};
      }
      case LayerKind::kMaxPool: {
        if (in.size() != 3) throw ConfigError(where + ": expects (C,H,W) input, got " + shape_string(in));
        if (s.window == 0 || s.stride == 0) throw ConfigError(where + ": window and stride must be positive");
        const auto oh = kernels::pool_output_extent(in[1], s);
        const auto ow = kernels::pool_output_extent(in[2], s);
        if (oh == 0 || ow == 0) throw ConfigError(where + ": window larger than input " + shape_string(in));
        return {in[0], oh, ow};
      }
      case LayerKind::kRelu:
      case LayerKind::kTanh:
        return in;
      case LayerKind::kFullyConnected: {
        if (s.outputs == 0) throw ConfigError(where + ": output width must be positive");
        const std::size_t fan_in = shape_size(in);
        add_parameter(l, "weight", {s.outputs, fan_in}, true);
        add_parameter(l, "bias", {s.outputs}, false);
        return {s.outputs};
      }
    }
    throw ConfigError(where + ": unknown layer kind");
  }

  Tensor<Real> flatten(Tensor<Real> x) const {
    const std::size_t batch = x.dim(0);
    return Tensor<Real>({batch, output_width()}, std::move(x.storage()));
  }

  void add_parameter(std::size_t l, const std::string& what, Shape shape, bool weight) {
    params_.push_back({"layer" + std::to_string(l) + "." + what, Tensor<Real>(std::move(shape)), l, weight});
  }

  void check_batch(const Tensor<Real>& batch) const {
    Shape expected{0};
    expected.insert(expected.end(), input_shape_.begin(), input_shape_.end());
    bool ok = batch.rank() == expected.size();
    for (std::size_t i = 1; ok && i < expected.size(); ++i) ok = batch.dim(i) == expected[i];
    if (!ok)
      throw ConfigError("layer 0 " + to_string(layers_[0]) + ": input batch shape " +
                        shape_string(batch.shape()) + " does not match expected (M," +
                        shape_string(input_shape_).substr(1));
  }

  Shape batch_shape(std::size_t batch, const Shape& per_image) const {
    Shape s{batch};
    s.insert(s.end(), per_image.begin(), per_image.end());
    return s;
  }

  std::pair<const Parameter<Real>*, const Parameter<Real>*> layer_params(std::size_t l) const {
    const Parameter<Real>* w = nullptr;
    const Parameter<Real>* b = nullptr;
    for (const auto& p : params_)
      if (p.layer == l) (p.is_weight ? w : b) = &p;
    return {w, b};
  }

  Tensor<Real> apply(std::size_t l, const Tensor<Real>& x, std::vector<std::int32_t>* argmax) const {
    const LayerSpec& s = layers_[l];
    const Shape& in = shapes_[l];
    const Shape& out = shapes_[l + 1];
    const std::size_t batch = x.dim(0);
    Tensor<Real> y(batch_shape(batch, out));
    switch (s.kind) {
      case LayerKind::kConv: {
        auto [w, b] = layer_params(l);
        const std::size_t plane = out[1] * out[2];
        const std::size_t patch = in[0] * s.window * s.window;
        AlignedVector<Real> cols(patch * plane);
        Eigen::Map<const Matrix<Real>> weight(w->value.data(), s.filters, patch);
        Eigen::Map<const Eigen::Vector<Real, Eigen::Dynamic>> bias(b->value.data(), s.filters);
        Eigen::Map<const Matrix<Real>> col_mat(cols.data(), patch, plane);
        for (std::size_t i = 0; i < batch; ++i) {
          kernels::im2col<Real>(x.slice(i), in[0], in[1], in[2], s, out[1], out[2], cols);
          Eigen::Map<Matrix<Real>> y_img(y.slice(i).data(), s.filters, plane);
          y_img.noalias() = weight * col_mat;
          y_img.colwise() += bias;
        }
        break;
      }
      case LayerKind::kMaxPool: {
        std::vector<std::int32_t> local;
        std::vector<std::int32_t>& idx = argmax ? *argmax : local;
        idx.assign(y.size(), 0);
        const std::size_t per = shape_size(out);
        for (std::size_t i = 0; i < batch; ++i)
          kernels::max_pool_forward<Real>(x.slice(i), in[0], in[1], in[2], s, out[1], out[2], y.slice(i),
                                          std::span<std::int32_t>(idx).subspan(i * per, per));
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case LayerKind::kFullyConnected: {
        auto [w, b] = layer_params(l);
        const std::size_t fan_in = shape_size(in);
        Eigen::Map<const Matrix<Real>> xm(x.data(), batch, fan_in);
        Eigen::Map<const Matrix<Real>> weight(w->value.data(), s.outputs, fan_in);
        Eigen::Map<const Eigen::RowVector<Real, Eigen::Dynamic>> bias(b->value.data(), s.outputs);
        Eigen::Map<Matrix<Real>> ym(y.data(), batch, s.outputs);
        ym.noalias() = xm * weight.transpose();
        ym.rowwise() += bias;
        break;
      }
    }
    return y;
  }

  std::size_t param_index(std::size_t l, bool weight) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].layer == l && params_[i].is_weight == weight) return i;
    throw StateError("layer " + std::to_string(l) + " has no parameters");
  }

  Tensor<Real> backprop(std::size_t l, const Tensor<Real>& g, Gradients<Real>& grads) const {
    const LayerSpec& s = layers_[l];
    const Shape& in = shapes_[l];
    const Shape& out = shapes_[l + 1];
    const Tensor<Real>& x = cache_[l];
    const std::size_t batch = x.dim(0);
    Tensor<Real> dx(x.shape());
    switch (s.kind) {
      case LayerKind::kConv: {
        const std::size_t wi = param_index(l, true);
        const std::size_t bi = param_index(l, false);
        const std::size_t plane = out[1] * out[2];
        const std::size_t patch = in[0] * s.window * s.window;
        AlignedVector<Real> cols(patch * plane);
        AlignedVector<Real> dcols(patch * plane);
        Eigen::Map<const Matrix<Real>> weight(params_[wi].value.data(), s.filters, patch);
        Eigen::Map<Matrix<Real>> dweight(grads.parameters[wi].data(), s.filters, patch);
        Eigen::Map<Eigen::Vector<Real, Eigen::Dynamic>> dbias(grads.parameters[bi].data(), s.filters);
        Eigen::Map<const Matrix<Real>> col_mat(cols.data(), patch, plane);
        Eigen::Map<Matrix<Real>> dcol_mat(dcols.data(), patch, plane);
        for (std::size_t i = 0; i < batch; ++i) {
          kernels::im2col<Real>(x.slice(i), in[0], in[1], in[2], s, out[1], out[2], cols);
          Eigen::Map<const Matrix<Real>> dy(g.slice(i).data(), s.filters, plane);
          dweight.noalias() += dy * col_mat.transpose();
          dbias += dy.rowwise().sum();
          dcol_mat.noalias() = weight.transpose() * dy;
          kernels::col2im<Real>(dcols, in[0], in[1], in[2], s, out[1], out[2], dx.slice(i));
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const std::size_t per = shape_size(out);
        const std::span<const std::int32_t> idx(argmax_[l]);
        for (std::size_t i = 0; i < batch; ++i)
          kernels::max_pool_backward<Real>(g.slice(i), idx.subspan(i * per, per), dx.slice(i));
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > Real(0) ? g[i] : Real(0);
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < x.size(); ++i) {
          const Real t = std::tanh(x[i]);
          dx[i] = g[i] * (Real(1) - t * t);
        }
        break;
      case LayerKind::kFullyConnected: {
        const std::size_t wi = param_index(l, true);
        const std::size_t bi = param_index(l, false);
        const std::size_t fan_in = shape_size(in);
        Eigen::Map<const Matrix<Real>> xm(x.data(), batch, fan_in);
        Eigen::Map<const Matrix<Real>> gm(g.data(), batch, s.outputs);
        Eigen::Map<const Matrix<Real>> weight(params_[wi].value.data(), s.outputs, fan_in);
        Eigen::Map<Matrix<Real>> dweight(grads.parameters[wi].data(), s.outputs, fan_in);
        Eigen::Map<Eigen::RowVector<Real, Eigen::Dynamic>> dbias(grads.parameters[bi].data(), s.outputs);
        Eigen::Map<Matrix<Real>> dxm(dx.data(), batch, fan_in);
        dweight.noalias() = gm.transpose() * xm;
        dbias = gm.colwise().sum();
        dxm.noalias() = gm * weight;
        break;
      }
    }
    return dx;
  }

  std::vector<LayerSpec> layers_;
  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<Parameter<Real>> params_;
  std::vector<Tensor<Real>> cache_;
  std::vector<std::vector<std::int32_t>> argmax_;
  bool has_cache_ = false;
};

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
///
/// Samples are drawn in double from a seeded mt19937_64 in parameter order,
/// so float and double networks built from the same seed agree up to rounding.
template <class Real>
void xavier_init(Network<Real>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : net.parameters()) {
    if (!p.is_weight) {
      p.value.fill(Real(0));
      continue;
    }
    const Shape& sh = p.value.shape();
    const std::size_t receptive = sh.size() == 4 ? sh[2] * sh[3] : 1;
    const double fan_in = static_cast<double>(sh[1] * receptive);
    const double fan_out = static_cast<double>(sh[0] * receptive);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.value.values()) v = static_cast<Real>(dist(rng));
  }
}

/// Copies parameters between networks of identical topology and different precision.
template <class To, class From>
Network<To> convert_network(const Network<From>& src) {
  Network<To> dst(src.layers(), src.input_shape());
  for (std::size_t i = 0; i < src.parameters().size(); ++i)
    dst.parameters()[i].value = src.parameters()[i].value.template cast<To>();
  return dst;
}

}  // namespace hashlab
