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

// End-to-end retrieval experiment: split an image pool, train on the
// training subset, encode queries and database, score the ranking.

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hashlab/checkpoint.hpp"
#include "hashlab/cifar.hpp"
#include "hashlab/retrieval.hpp"
#include "hashlab/shadow.hpp"

namespace hashlab {

struct ProtocolSizes {
  std::size_t queries = 200;
  std::optional<std::size_t> database = 5000;  // nullopt: every non-query image
  std::size_t train_images = 1000;
};

struct Preset {
  ProtocolSizes sizes;
  int epochs = 30;
};

/// 200 queries, 5000 database images, 1000 of them for training, 30 epochs.
inline Preset desk_preset() { return {{200, 5000, 1000}, 30}; }

/// 1000 queries, the remaining 59000 images as database, 5000 of them for training, 150 epochs.
inline Preset full_preset() { return {{1000, std::nullopt, 5000}, 150}; }

struct ExperimentConfig {
  TrainConfig train;
  ProtocolSizes sizes;
  std::optional<std::size_t> map_at;
};

struct ExperimentResult {
  Split split;
  TrainResult trained;
  PackedCodes query_codes;
  PackedCodes database_codes;  // training rows from the shadow codes, the rest from sign(forward)
  std::vector<std::uint8_t> query_labels;
  std::vector<std::uint8_t> database_labels;
  MapReport map;
};

inline MapReport evaluate_codes(const PackedCodes& queries, const PackedCodes& database,
                                std::span<const std::uint8_t> query_labels, std::span<const std::uint8_t> database_labels,
                                std::optional<std::size_t> at = std::nullopt) {
  std::vector<RankedResult> rankings;
  rankings.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) rankings.push_back(rank_database(queries.code(q), database, at, q));
  return mean_average_precision(
      rankings, [&](std::size_t q, std::size_t d) { return query_labels[q] == database_labels[d]; }, at);
}

inline ExperimentResult run_experiment(const LabeledImageSet& pool, const ExperimentConfig& cfg,
                                       const EpochCallback& on_epoch = {}) {
  cfg.train.validate();
  Split split = make_split(pool.labels, cfg.sizes.queries, cfg.sizes.database, cfg.sizes.train_images, cfg.train.seed);
  const LabeledImageSet train_set = pool.subset(split.train);
  TrainResult trained = train(train_set, SimilarityOracle(train_set.labels), cfg.train, on_epoch);

  const std::size_t chunk = cfg.train.batch;
  const LabeledImageSet query_set = pool.subset(split.query);
  PackedCodes query_codes = query_set.size() ? binarize_and_pack(encode_outputs(trained.net, query_set, chunk))
                                             : PackedCodes(0, cfg.train.k);
  const LabeledImageSet db_set = pool.subset(split.database);
  SignMatrix db_signs = db_set.size() ? shadow_update(encode_outputs(trained.net, db_set, chunk))
                                      : SignMatrix(0, cfg.train.k);
  // split.train is a sorted subset of the sorted database ids
  std::size_t t = 0;
  for (std::size_t d = 0; d < split.database.size() && t < split.train.size(); ++d)
    if (split.database[d] == split.train[t])
      db_signs.row(static_cast<Eigen::Index>(d)) = trained.shadow.row(static_cast<Eigen::Index>(t++));
  PackedCodes database_codes = pack_signs(db_signs);
  const MapReport map = evaluate_codes(query_codes, database_codes, query_set.labels, db_set.labels, cfg.map_at);
  return {std::move(split),         std::move(trained), std::move(query_codes), std::move(database_codes),
          query_set.labels,         db_set.labels,      map};
}

/// File names written by write_experiment, relative to the output directory.
namespace artifact {
inline constexpr const char* kModel = "model.hlck";
inline constexpr const char* kQueryCodes = "query_codes.hlpc";
inline constexpr const char* kDatabaseCodes = "database_codes.hlpc";
inline constexpr const char* kShadowCodes = "shadow_codes.hlpc";
inline constexpr const char* kLossTrace = "loss_trace.tsv";
inline constexpr const char* kQueryLabels = "query_labels.txt";
inline constexpr const char* kDatabaseLabels = "database_labels.txt";
inline constexpr const char* kQueryIds = "query_ids.txt";
inline constexpr const char* kDatabaseIds = "database_ids.txt";
inline constexpr const char* kTrainIds = "train_ids.txt";
}  // namespace artifact

inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / artifact::kModel, r.trained.net);
  write_codes(dir / artifact::kQueryCodes, r.query_codes);
  write_codes(dir / artifact::kDatabaseCodes, r.database_codes);
  write_codes(dir / artifact::kShadowCodes, pack_signs(r.trained.shadow));
  write_loss_trace(dir / artifact::kLossTrace, r.trained.trace);
  write_labels(dir / artifact::kQueryLabels, r.query_labels);
  write_labels(dir / artifact::kDatabaseLabels, r.database_labels);
  write_manifest(dir / artifact::kQueryIds, r.split.query);
  write_manifest(dir / artifact::kDatabaseIds, r.split.database);
  write_manifest(dir / artifact::kTrainIds, r.split.train);
}

}  // namespace hashlab
