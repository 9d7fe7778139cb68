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

// Bit-packed binary codes and exact linear-scan Hamming retrieval.
//
// Bit j of code i is set iff the real output B(i,j) >= 0, i.e. the code bit
// for sign +1. Unused high bits of the last word are always zero so that a
// word-level popcount of a XOR is the Hamming distance.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hashlab/binary_io.hpp"
#include "hashlab/tensor.hpp"

namespace hashlab {

inline constexpr std::uint32_t kCodesVersion = 1;

inline std::size_t words_for_bits(int k) { return (static_cast<std::size_t>(k) + 63) / 64; }

/// A single packed code: its words and its bit length.
struct CodeView {
  std::span<const std::uint64_t> words;
  int bits = 0;
};

class PackedCodes {
 public:
  PackedCodes() = default;
  PackedCodes(std::size_t n, int k) : n_(n), k_(k), stride_(words_for_bits(k)), words_(n * stride_, 0) {
    if (k <= 0) throw ConfigError("code length must be positive, got " + std::to_string(k));
  }
  PackedCodes(std::size_t n, int k, std::vector<std::uint64_t> words) : PackedCodes(n, k) {
    if (words.size() != words_.size())
      throw DataError("expected " + std::to_string(words_.size()) + " code words, got " + std::to_string(words.size()));
    words_ = std::move(words);
    if (k % 64 != 0) {
      const std::uint64_t pad_mask = ~((std::uint64_t{1} << (k % 64)) - 1);
      for (std::size_t i = 0; i < n_; ++i)
        if (words_[i * stride_ + stride_ - 1] & pad_mask)
          throw DataError("code " + std::to_string(i) + " has nonzero padding bits");
    }
  }

  std::size_t size() const noexcept { return n_; }
  int bits() const noexcept { return k_; }
  std::size_t words_per_code() const noexcept { return stride_; }
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  CodeView code(std::size_t i) const {
    return {std::span<const std::uint64_t>(words_).subspan(i * stride_, stride_), k_};
  }

  bool bit(std::size_t i, std::size_t j) const { return (words_[i * stride_ + j / 64] >> (j % 64)) & 1u; }
  void set_bit(std::size_t i, std::size_t j, bool on) {
    auto& w = words_[i * stride_ + j / 64];
    const std::uint64_t mask = std::uint64_t{1} << (j % 64);
    w = on ? (w | mask) : (w & ~mask);
  }

  friend bool operator==(const PackedCodes&, const PackedCodes&) = default;

 private:
  std::size_t n_ = 0;
  int k_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> words_;
};

template <class Real>
PackedCodes binarize_and_pack(const Matrix<Real>& B) {
  PackedCodes codes(static_cast<std::size_t>(B.rows()), static_cast<int>(B.cols()));
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      if (B(i, j) >= Real(0)) codes.set_bit(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
  return codes;
}

inline PackedCodes pack_signs(const SignMatrix& U) {
  PackedCodes codes(static_cast<std::size_t>(U.rows()), static_cast<int>(U.cols()));
  for (Eigen::Index i = 0; i < U.rows(); ++i)
    for (Eigen::Index j = 0; j < U.cols(); ++j)
      if (U(i, j) > 0) codes.set_bit(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
  return codes;
}

inline SignMatrix unpack(const PackedCodes& codes) {
  SignMatrix U(static_cast<Eigen::Index>(codes.size()), codes.bits());
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (int j = 0; j < codes.bits(); ++j)
      U(static_cast<Eigen::Index>(i), j) = codes.bit(i, static_cast<std::size_t>(j)) ? 1 : -1;
  return U;
}

inline int hamming(CodeView a, CodeView b) {
  if (a.bits != b.bits)
    throw ConfigError("hamming: code lengths differ (" + std::to_string(a.bits) + " vs " + std::to_string(b.bits) + ")");
  int d = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w) d += std::popcount(a.words[w] ^ b.words[w]);
  return d;
}

struct Hit {
  std::size_t id = 0;
  int distance = 0;
  friend bool operator==(const Hit&, const Hit&) = default;
};

struct RankedResult {
  std::size_t query = 0;
  std::vector<Hit> hits;  // ascending (distance, id)
};

/// Exact linear scan. Distances are bucketed (they lie in [0, k]) and each
/// bucket is filled in id order, which yields the (distance, id) order directly.
inline RankedResult rank_database(CodeView query, const PackedCodes& db, std::optional<std::size_t> top = std::nullopt,
                                  std::size_t query_id = 0) {
  RankedResult result{query_id, {}};
  if (db.size() == 0) return result;
  if (query.bits != db.bits())
    throw ConfigError("query has " + std::to_string(query.bits) + " bits, database has " + std::to_string(db.bits()));
  std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(db.bits()) + 1);
  for (std::size_t i = 0; i < db.size(); ++i) buckets[static_cast<std::size_t>(hamming(query, db.code(i)))].push_back(i);
  const std::size_t limit = top ? std::min(*top, db.size()) : db.size();
  result.hits.reserve(limit);
  for (std::size_t d = 0; d < buckets.size() && result.hits.size() < limit; ++d)
    for (std::size_t id : buckets[d]) {
      if (result.hits.size() == limit) break;
      result.hits.push_back({id, static_cast<int>(d)});
    }
  return result;
}

/// Ids (ascending) within Hamming distance r of the query.
inline std::vector<std::size_t> hamming_radius_retrieve(CodeView query, const PackedCodes& db, int r) {
  if (r < 0 || r > query.bits) throw ConfigError("radius must lie in [0, k], got " + std::to_string(r));
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < db.size(); ++i)
    if (hamming(query, db.code(i)) <= r) ids.push_back(i);
  return ids;
}

/// relevance(query id, database id).
using Relevance = std::function<bool(std::size_t, std::size_t)>;

struct MapReport {
  double map = 0.0;
  std::size_t evaluated_queries = 0;
  std::size_t excluded_queries = 0;  // no relevant item among the considered ranks
};

/// AP = mean over relevant ranks r <= cutoff of precision@r; mAP averages AP
/// over queries that have at least one relevant item within the cutoff.
inline MapReport mean_average_precision(std::span<const RankedResult> rankings, const Relevance& relevant,
                                        std::optional<std::size_t> at = std::nullopt) {
  MapReport report;
  double sum = 0.0;
  for (const auto& r : rankings) {
    const std::size_t depth = at ? std::min(*at, r.hits.size()) : r.hits.size();
    std::size_t found = 0;
    double precision_sum = 0.0;
    for (std::size_t rank = 0; rank < depth; ++rank)
      if (relevant(r.query, r.hits[rank].id)) {
        ++found;
        precision_sum += static_cast<double>(found) / static_cast<double>(rank + 1);
      }
    if (found == 0) {
      ++report.excluded_queries;
      continue;
    }
    sum += precision_sum / static_cast<double>(found);
    ++report.evaluated_queries;
  }
  report.map = report.evaluated_queries ? sum / static_cast<double>(report.evaluated_queries) : 0.0;
  return report;
}

/// Mean fraction of relevant items among the first n hits of each ranking.
inline double precision_at(std::span<const RankedResult> rankings, const Relevance& relevant, std::size_t n) {
  if (rankings.empty() || n == 0) return 0.0;
  double sum = 0.0;
  for (const auto& r : rankings) {
    const std::size_t depth = std::min(n, r.hits.size());
    std::size_t found = 0;
    for (std::size_t i = 0; i < depth; ++i) found += relevant(r.query, r.hits[i].id) ? 1 : 0;
    sum += depth ? static_cast<double>(found) / static_cast<double>(depth) : 0.0;
  }
  return sum / static_cast<double>(rankings.size());
}

struct RadiusReport {
  double precision = 0.0;  // mean over queries; empty retrievals count as 0
  double recall = 0.0;     // mean over queries with at least one relevant item
};

/// Precision/recall inside the Hamming ball of radius r; rankings must be complete.
inline RadiusReport radius_metrics(std::span<const RankedResult> rankings, const Relevance& relevant, int r) {
  RadiusReport out;
  std::size_t recall_queries = 0;
  for (const auto& q : rankings) {
    std::size_t retrieved = 0, hit = 0, total_relevant = 0;
    for (const auto& h : q.hits) {
      const bool rel = relevant(q.query, h.id);
      total_relevant += rel;
      if (h.distance <= r) {
        ++retrieved;
        hit += rel;
      }
    }
    out.precision += retrieved ? static_cast<double>(hit) / static_cast<double>(retrieved) : 0.0;
    if (total_relevant) {
      out.recall += static_cast<double>(hit) / static_cast<double>(total_relevant);
      ++recall_queries;
    }
  }
  if (!rankings.empty()) out.precision /= static_cast<double>(rankings.size());
  if (recall_queries) out.recall /= static_cast<double>(recall_queries);
  return out;
}

// HLPC codes file: "HLPC", u32 version, u64 n, u32 k, n * ceil(k/64) u64 words (little-endian).

inline void write_codes(const std::filesystem::path& path, const PackedCodes& codes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write("HLPC", 4);
  io::write_le<std::uint32_t>(os, kCodesVersion);
  io::write_le<std::uint64_t>(os, codes.size());
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(codes.bits()));
  for (auto w : codes.words()) io::write_le<std::uint64_t>(os, w);
  if (!os) throw DataError("write failed for " + path.string());
}

inline PackedCodes read_codes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open codes file " + path.string());
  io::expect_magic(is, "HLPC", path.string());
  const auto version = io::read_le<std::uint32_t>(is, "version");
  if (version != kCodesVersion)
    throw DataError(path.string() + ": unsupported codes version " + std::to_string(version));
  const auto n = io::read_le<std::uint64_t>(is, "code count");
  const auto k = io::read_le<std::uint32_t>(is, "code length");
  if (k == 0 || k > (1u << 20)) throw DataError(path.string() + ": implausible code length " + std::to_string(k));
  const auto body = is.tellg();
  is.seekg(0, std::ios::end);
  const auto available = static_cast<std::uint64_t>(is.tellg() - body);
  is.seekg(body);
  const std::uint64_t stride = words_for_bits(static_cast<int>(k));
  if (n > available / 8 / stride)
    throw DataError(path.string() + ": header announces " + std::to_string(n) + " codes but only " +
                    std::to_string(available) + " payload bytes follow (offset " + std::to_string(body) + ")");
  std::vector<std::uint64_t> words(static_cast<std::size_t>(n * stride));
  for (auto& w : words) w = io::read_le<std::uint64_t>(is, "code words");
  return PackedCodes(static_cast<std::size_t>(n), static_cast<int>(k), std::move(words));
}

}  // namespace hashlab
