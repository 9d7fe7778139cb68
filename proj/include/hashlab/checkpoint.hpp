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

// HLCK checkpoint format (all integers little-endian):
//
//   "HLCK"  u32 version  u32 count
//   count x { u32 name_len, name bytes (UTF-8), u32 rank, rank x u64 extent,
//             product(extents) x f32 }
//
// A network is stored as the tensors "arch" (L x 6: kind, filters, window,
// stride, pad, outputs), "input_shape", then every parameter by name.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hashlab/binary_io.hpp"
#include "hashlab/network.hpp"

namespace hashlab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

inline void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write("HLCK", 4);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) io::write_le<std::uint64_t>(os, e);
    for (float v : t.values()) io::write_le<float>(os, v);
  }
  if (!os) throw DataError("write failed for " + path.string());
}

inline std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  io::expect_magic(is, "HLCK", path.string());
  const auto version = io::read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = io::read_le<std::uint32_t>(is, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_le<std::uint32_t>(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError(path.string() + ": truncated tensor name");
    const auto rank = io::read_le<std::uint32_t>(is, "rank");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(io::read_le<std::uint64_t>(is, "extent"));
    std::vector<float> data(shape_size(shape));
    for (auto& v : data) v = io::read_le<float>(is, "tensor data of " + name);
    out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(data))});
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const Network<float>& net) {
  std::vector<NamedTensor> tensors;
  const auto& layers = net.layers();
  std::vector<float> arch;
  for (const auto& s : layers)
    for (std::size_t v : {static_cast<std::size_t>(s.kind), s.filters, s.window, s.stride, s.pad, s.outputs})
      arch.push_back(static_cast<float>(v));
  tensors.push_back({"arch", Tensor<float>({layers.size(), 6}, std::move(arch))});
  const Shape& in = net.input_shape();
  tensors.push_back({"input_shape", Tensor<float>({in.size()}, std::vector<float>(in.begin(), in.end()))});
  for (const auto& p : net.parameters()) tensors.push_back({p.name, p.value});
  write_tensors(path, tensors);
}

inline Network<float> load_checkpoint(const std::filesystem::path& path) {
  auto tensors = read_tensors(path);
  auto find = [&](const std::string& name) -> const Tensor<float>& {
    for (const auto& t : tensors)
      if (t.name == name) return t.tensor;
    throw DataError(path.string() + ": checkpoint has no tensor \"" + name + "\"");
  };
  const auto& arch = find("arch");
  if (arch.rank() != 2 || arch.dim(1) != 6) throw DataError(path.string() + ": malformed arch tensor");
  std::vector<LayerSpec> layers;
  auto field = [&](std::size_t r, std::size_t c) { return static_cast<std::size_t>(std::lround(arch[r * 6 + c])); };
  for (std::size_t r = 0; r < arch.dim(0); ++r) {
    if (field(r, 0) > static_cast<std::size_t>(LayerKind::kFullyConnected))
      throw DataError(path.string() + ": unknown layer kind in arch row " + std::to_string(r));
    layers.push_back({static_cast<LayerKind>(field(r, 0)), field(r, 1), field(r, 2), field(r, 3), field(r, 4),
                      field(r, 5)});
  }
  const auto& in = find("input_shape");
  Shape input;
  for (float v : in.values()) input.push_back(static_cast<std::size_t>(std::lround(v)));
  Network<float> net(std::move(layers), std::move(input));
  for (auto& p : net.parameters()) {
    const auto& t = find(p.name);
    if (t.shape() != p.value.shape())
      throw DataError(path.string() + ": tensor " + p.name + " has shape " + shape_string(t.shape()) +
                      ", architecture expects " + shape_string(p.value.shape()));
    p.value = t;
  }
  return net;
}

}  // namespace hashlab
