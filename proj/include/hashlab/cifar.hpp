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

// CIFAR-10 "binary version" ingestion, stratified splits and the
// label-derived similarity oracle.
//
// Each record is 3073 bytes: one label byte in [0,9] followed by 3072 pixel
// bytes, channel-planar (1024 R, 1024 G, 1024 B), each plane row-major 32x32.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hashlab/losses.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

inline constexpr std::size_t kCifarChannels = 3;
inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = kCifarChannels * kCifarSide * kCifarSide;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;
inline constexpr int kCifarClasses = 10;

struct LabeledImageSet {
  Tensor<float> images;  // (n,3,32,32) for CIFAR, values in [0,1]; empty when n == 0
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  /// Stack the selected images into a (|ids|, C, H, W) batch.
  Tensor<float> batch(std::span<const std::size_t> ids) const {
    if (ids.empty()) return {};
    Shape shape = images.shape();
    shape[0] = ids.size();
    Tensor<float> out(std::move(shape));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto src = images.slice(ids[i]);
      std::copy(src.begin(), src.end(), out.slice(i).begin());
    }
    return out;
  }

  LabeledImageSet subset(std::span<const std::size_t> ids) const {
    LabeledImageSet out{batch(ids), {}};
    for (auto id : ids) out.labels.push_back(labels.at(id));
    return out;
  }
};

inline LabeledImageSet concatenate(const LabeledImageSet& a, const LabeledImageSet& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  AlignedVector<float> data(a.images.storage());
  data.insert(data.end(), b.images.storage().begin(), b.images.storage().end());
  Shape shape = a.images.shape();
  if (b.images.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), b.images.shape().begin() + 1))
    throw DataError("cannot concatenate image sets of shapes " + shape_string(shape) + " and " +
                    shape_string(b.images.shape()));
  shape[0] = a.size() + b.size();
  LabeledImageSet out{Tensor<float>(std::move(shape), std::move(data)), a.labels};
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

/// Reads one CIFAR-10 binary batch file.
inline LabeledImageSet read_cifar_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open CIFAR-10 file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0)
    throw DataError(path.string() + ": truncated record at byte offset " + std::to_string(n * kCifarRecordBytes) +
                    " (file is " + std::to_string(bytes.size()) + " bytes, records are " +
                    std::to_string(kCifarRecordBytes) + ")");
  LabeledImageSet set;
  if (n == 0) {
    std::cerr << "warning: " << path.string() << " contains no records\n";
    return set;
  }
  set.images = Tensor<float>({n, kCifarChannels, kCifarSide, kCifarSide});
  set.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9)
      throw DataError(path.string() + ": corrupt record " + std::to_string(r) + " at byte offset " +
                      std::to_string(r * kCifarRecordBytes) + ": label " + std::to_string(int(rec[0])) + " > 9");
    set.labels[r] = rec[0];
    auto dst = set.images.slice(r);
    for (std::size_t p = 0; p < kCifarPixels; ++p) dst[p] = static_cast<float>(rec[1 + p]) / 255.0f;
  }
  return set;
}

/// Writes records in the same layout; pixels are rounded back to bytes.
inline void write_cifar_file(const std::filesystem::path& path, const LabeledImageSet& set) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t r = 0; r < set.size(); ++r) {
    rec[0] = set.labels[r];
    auto src = set.images.slice(r);
    for (std::size_t p = 0; p < kCifarPixels; ++p)
      rec[1 + p] = static_cast<unsigned char>(std::lround(std::clamp(src[p], 0.0f, 1.0f) * 255.0f));
    os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
  if (!os) throw DataError("write failed for " + path.string());
}

enum class CifarPart { kTrain, kTest };

/// Loads data_batch_1..5.bin (train, 50000 records) or test_batch.bin (10000) from dir.
inline LabeledImageSet load_cifar10(const std::filesystem::path& dir, CifarPart part) {
  std::vector<std::filesystem::path> files;
  if (part == CifarPart::kTrain) {
    for (int b = 1; b <= 5; ++b) files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
  } else {
    files.push_back(dir / "test_batch.bin");
  }
  LabeledImageSet all;
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw DataError("missing CIFAR-10 file " + f.string());
    all = concatenate(all, read_cifar_file(f));
  }
  return all;
}

/// Train followed by test: the 60000-image pool used by the retrieval protocol.
inline LabeledImageSet load_cifar10_all(const std::filesystem::path& dir) {
  return concatenate(load_cifar10(dir, CifarPart::kTrain), load_cifar10(dir, CifarPart::kTest));
}

/// Class-equality similarity with the two numeric conventions used by the objectives.
class SimilarityOracle {
 public:
  SimilarityOracle() = default;
  explicit SimilarityOracle(std::vector<std::uint8_t> labels) : labels_(std::move(labels)) {}

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }

  bool similar(std::size_t i, std::size_t j) const { return labels_.at(i) == labels_.at(j); }
  /// 0 similar / 1 dissimilar (SRH, DSH, Cauchy).
  int y(std::size_t i, std::size_t j) const { return similar(i, j) ? 0 : 1; }
  /// +1 similar / -1 dissimilar (CNNH, ADSH).
  int s(std::size_t i, std::size_t j) const { return similar(i, j) ? 1 : -1; }

  PairLabels pair_labels(std::span<const std::size_t> ids) const {
    std::vector<std::uint8_t> sub;
    for (auto id : ids) sub.push_back(labels_.at(id));
    return PairLabels::from_classes<std::uint8_t>(sub);
  }

  /// S(r, c) = s(rows[r], cols[c]).
  Matrix<double> sign_similarity(std::span<const std::size_t> rows, std::span<const std::size_t> cols) const {
    Matrix<double> S(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        S(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s(rows[r], cols[c]);
    return S;
  }

 private:
  std::vector<std::uint8_t> labels_;
};

struct Split {
  std::vector<std::size_t> query;
  std::vector<std::size_t> database;
  std::vector<std::size_t> train;  // subset of database
};

namespace detail {

/// Draws `count` ids class by class in round-robin order from per-class queues.
inline std::vector<std::size_t> draw_stratified(std::vector<std::vector<std::size_t>>& queues, std::size_t count) {
  std::vector<std::size_t> out;
  std::vector<std::size_t> cursor(queues.size(), 0);
  while (out.size() < count) {
    bool progressed = false;
    for (std::size_t c = 0; c < queues.size() && out.size() < count; ++c)
      if (cursor[c] < queues[c].size()) {
        out.push_back(queues[c][cursor[c]++]);
        progressed = true;
      }
    if (!progressed) break;
  }
  for (std::size_t c = 0; c < queues.size(); ++c)
    queues[c].erase(queues[c].begin(), queues[c].begin() + static_cast<std::ptrdiff_t>(cursor[c]));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Stratified query / database / training split. The database is every
/// non-query item unless n_database caps it; training ids come from the database.
inline Split make_split(std::span<const std::uint8_t> labels, std::size_t n_query,
                        std::optional<std::size_t> n_database, std::size_t n_train, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n_query > n) throw ConfigError("split asks for " + std::to_string(n_query) + " queries from " + std::to_string(n) + " items");
  const std::size_t available = n - n_query;
  const std::size_t db_size = n_database.value_or(available);
  if (db_size > available)
    throw ConfigError("split asks for " + std::to_string(n_query) + " queries + " + std::to_string(db_size) +
                      " database items from " + std::to_string(n) + " items");
  if (n_train > db_size)
    throw ConfigError("training subset of " + std::to_string(n_train) + " exceeds database of " + std::to_string(db_size));

  std::uint8_t max_label = 0;
  for (auto l : labels) max_label = std::max(max_label, l);
  std::vector<std::vector<std::size_t>> queues(n ? max_label + 1u : 0u);
  for (std::size_t i = 0; i < n; ++i) queues[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  for (auto& q : queues) std::shuffle(q.begin(), q.end(), rng);

  Split split;
  split.query = detail::draw_stratified(queues, n_query);
  split.database = detail::draw_stratified(queues, db_size);

  std::vector<std::vector<std::size_t>> db_queues(queues.size());
  for (auto id : split.database) db_queues[labels[id]].push_back(id);
  for (auto& q : db_queues) std::shuffle(q.begin(), q.end(), rng);
  split.train = detail::draw_stratified(db_queues, n_train);
  return split;
}

inline void write_manifest(const std::filesystem::path& path, std::span<const std::size_t> ids) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  for (auto id : ids) os << id << '\n';
}

inline std::vector<std::size_t> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::vector<std::size_t> ids;
  std::size_t id;
  while (is >> id) ids.push_back(id);
  if (!is.eof()) throw DataError(path.string() + ": malformed id list");
  return ids;
}

/// Plain-text label file: one integer label per line.
inline void write_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  for (auto l : labels) os << int(l) << '\n';
}

inline std::vector<std::uint8_t> read_labels(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open label file " + path.string());
  std::vector<std::uint8_t> labels;
  int l;
  while (is >> l) {
    if (l < 0 || l > 255) throw DataError(path.string() + ": label out of range: " + std::to_string(l));
    labels.push_back(static_cast<std::uint8_t>(l));
  }
  if (!is.eof()) throw DataError(path.string() + ": malformed label list");
  return labels;
}

}  // namespace hashlab
