// Copyright 2026 The FuseNet Authors.
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

// End-to-end experiment plumbing shared by the command-line tool and the
// test suites: split, fit features on train, encode, build and train a
// variant. Everything needed to re-encode data for a trained model travels
// in its metadata.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/fusion.hpp"
#include "fusenet/train.hpp"

namespace fusenet {

inline constexpr std::array<double, 3> kDefaultSplit = {0.6, 0.2, 0.2};

namespace meta {
inline constexpr const char* kFeatures = "features";
inline constexpr const char* kEmbeddings = "embeddings";
inline constexpr const char* kSplitSeed = "split_seed";
inline constexpr const char* kSplit = "split";
}  // namespace meta

struct PreparedData {
  DatasetSplits splits;
  FeaturePipeline pipeline;
  std::vector<LabeledInput> train, val, test;
};

/// Stratified split, feature fit on the train split only, and encoding of all
/// three splits. `table` may be null when no model will read text.
inline PreparedData prepare(std::span<const Example> data, const EmbeddingTable* table,
                            std::size_t max_seq_len, std::array<double, 3> fractions,
                            std::uint64_t split_seed) {
  PreparedData p;
  p.splits = split(data, fractions, split_seed);
  p.pipeline = FeaturePipeline::fit(p.splits.train);
  std::optional<TextEncoder> enc;
  if (table) enc.emplace(*table, max_seq_len);
  const TextEncoder* e = enc ? &*enc : nullptr;
  p.train = encode_examples(p.splits.train, p.pipeline, e);
  p.val = encode_examples(p.splits.val, p.pipeline, e);
  p.test = encode_examples(p.splits.test, p.pipeline, e);
  return p;
}

/// Copies the feature widths implied by `p` (and the embedding width) into
/// `cfg`.
inline ModelConfig fit_dims(ModelConfig cfg, const PreparedData& p, const EmbeddingTable* table) {
  cfg.num_feature_dim = p.pipeline.scaler.mean.size();
  cfg.cat_feature_dim = p.pipeline.encoder.dim();
  if (table) cfg.embed_dim = table->dim();
  return cfg;
}

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  std::array<double, 3> fractions = kDefaultSplit;
  std::uint64_t split_seed = 1;
  /// Recorded in the model so eval/predict can find the vectors again.
  std::string embeddings_path;
};

/// Builds the variant from `cfg.model` (feature widths taken from `p`),
/// trains it, and stamps the metadata needed to re-encode inputs.
inline TrainResult run_experiment(Variant variant, const PreparedData& p, const EmbeddingTable* table,
                                  const ExperimentConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (uses_text(variant) && table == nullptr) {
    throw ArgumentError("variant " + std::string(to_string(variant)) + " needs word embeddings");
  }
  const ModelConfig mc = fit_dims(cfg.model, p, table);
  FusionModel model = build(variant, mc);
  model.metadata[meta::kFeatures] = p.pipeline.to_json_string();
  model.metadata[meta::kSplitSeed] = std::to_string(cfg.split_seed);
  model.metadata[meta::kSplit] = detail::format_double(cfg.fractions[0]) + ',' +
                                 detail::format_double(cfg.fractions[1]) + ',' +
                                 detail::format_double(cfg.fractions[2]);
  if (!cfg.embeddings_path.empty()) model.metadata[meta::kEmbeddings] = cfg.embeddings_path;
  return train(std::move(model), p.train, p.val, cfg.train, on_epoch);
}

inline FeaturePipeline pipeline_of(const FusionModel& m) {
  const auto it = m.metadata.find(meta::kFeatures);
  if (it == m.metadata.end()) throw ModelFileError("meta features", "model carries no feature pipeline");
  return FeaturePipeline::from_json_string(it->second);
}

/// Split seed and fractions the model was trained with.
inline std::pair<std::uint64_t, std::array<double, 3>> split_of(const FusionModel& m) {
  std::uint64_t seed = 1;
  std::array<double, 3> fr = kDefaultSplit;
  if (auto it = m.metadata.find(meta::kSplitSeed); it != m.metadata.end()) {
    if (!detail::parse_number(it->second, seed)) throw ModelFileError("meta split_seed", "malformed");
  }
  if (auto it = m.metadata.find(meta::kSplit); it != m.metadata.end()) {
    std::string s = it->second;
    std::replace(s.begin(), s.end(), ',', ' ');
    const auto f = detail::split_spaces(s);
    if (f.size() != 3 || !detail::parse_number(f[0], fr[0]) || !detail::parse_number(f[1], fr[1]) ||
        !detail::parse_number(f[2], fr[2])) {
      throw ModelFileError("meta split", "malformed '" + it->second + "'");
    }
  }
  return {seed, fr};
}

/// Encodes examples exactly as the model saw them in training.
inline std::vector<LabeledInput> encode_for(const FusionModel& m, std::span<const Example> data,
                                            const EmbeddingTable* table) {
  if (uses_text(m.variant)) {
    if (table == nullptr) throw ArgumentError("model reads text but no embeddings were given");
    if (table->dim() != m.config.embed_dim) {
      throw ShapeError("embeddings have dimension " + std::to_string(table->dim()) + ", model expects " +
                       std::to_string(m.config.embed_dim));
    }
  }
  const FeaturePipeline pipeline = pipeline_of(m);
  std::optional<TextEncoder> enc;
  if (uses_text(m.variant)) enc.emplace(*table, m.config.max_seq_len);
  return encode_examples(data, pipeline, enc ? &*enc : nullptr);
}

}  // namespace fusenet
