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

// Dataset schema and JSONL I/O, tabular feature preprocessing, stratified
// splitting, and encoding of examples into network inputs.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/fusion.hpp"
#include "fusenet/numcore.hpp"
#include "fusenet/textprep.hpp"
#include "json.hpp"

namespace fusenet {

/// The 13 inquiry topics; position defines the class index.
inline constexpr std::array<std::string_view, 13> kClassNames = {
    "Cost Explanation",
    "Decline Follow Up",
    "Early Payoff",
    "Edit Offer if Already Accepted",
    "Funds ETA",
    "How to Enroll",
    "Increase Options",
    "Minimum Repayment Requirement",
    "Not Eligible for Renewal",
    "Renewal Eligibility",
    "No Credit Check",
    "Plan Completed",
    "Other",
};

inline constexpr std::size_t kNumClasses = kClassNames.size();

inline std::optional<std::size_t> class_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return i;
  }
  return std::nullopt;
}

inline std::string_view class_name(std::size_t index) {
  if (index >= kNumClasses) throw ArgumentError("class index " + std::to_string(index) + " out of range");
  return kClassNames[index];
}

struct Example {
  std::string id;
  std::string text;
  std::vector<double> numerical;
  std::vector<std::pair<std::string, std::string>> categorical;
  std::string label;

  friend bool operator==(const Example&, const Example&) = default;
};

using Dataset = std::vector<Example>;

// ---------------------------------------------------------------------------
// JSONL

inline nlohmann::ordered_json to_json(const Example& ex) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["text"] = ex.text;
  j["numerical"] = ex.numerical;
  auto cat = nlohmann::ordered_json::object();
  for (const auto& [name, value] : ex.categorical) cat[name] = value;
  j["categorical"] = std::move(cat);
  j["label"] = ex.label;
  return j;
}

inline Example example_from_json(const nlohmann::ordered_json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("record is not a JSON object", line);
  auto field = [&](const char* name) -> const nlohmann::ordered_json& {
    const auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'", line);
    return *it;
  };
  Example ex;
  const auto& id = field("id");
  const auto& text = field("text");
  const auto& label = field("label");
  if (!id.is_string()) throw ParseError("field 'id' must be a string", line);
  if (!text.is_string()) throw ParseError("field 'text' must be a string", line);
  if (!label.is_string()) throw ParseError("field 'label' must be a string", line);
  ex.id = id.get<std::string>();
  ex.text = text.get<std::string>();
  ex.label = label.get<std::string>();
  if (!class_index(ex.label)) throw ParseError("unknown label '" + ex.label + "'", line);

  const auto& num = field("numerical");
  if (!num.is_array()) throw ParseError("field 'numerical' must be an array", line);
  for (std::size_t i = 0; i < num.size(); ++i) {
    if (!num[i].is_number()) {
      throw ParseError("numerical[" + std::to_string(i) + "] is not a number", line);
    }
    ex.numerical.push_back(num[i].get<double>());
  }
  const auto& cat = field("categorical");
  if (!cat.is_object()) throw ParseError("field 'categorical' must be an object", line);
  for (const auto& [name, value] : cat.items()) {
    if (!value.is_string()) {
      throw ParseError("categorical '" + name + "' must be a string", line);
    }
    ex.categorical.emplace_back(name, value.get<std::string>());
  }
  return ex;
}

/// One record per line; blank lines are skipped. Every record must carry the
/// same number of numerical features.
inline Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path);
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    Example ex = example_from_json(j, lineno);
    if (!out.empty() && ex.numerical.size() != out.front().numerical.size()) {
      throw ParseError("expected " + std::to_string(out.front().numerical.size()) +
                           " numerical features, got " + std::to_string(ex.numerical.size()),
                       lineno);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_jsonl(const std::string& path, std::span<const Example> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset " + path);
  for (const auto& ex : data) out << to_json(ex).dump() << '\n';
  if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Tabular features

/// Per-column standardisation with population statistics of the train split.
/// Constant columns map to 0.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  static FeatureScaler fit(std::span<const Example> train) {
    if (train.empty()) throw ArgumentError("FeatureScaler: empty train split");
    const std::size_t d = train.front().numerical.size();
    FeatureScaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& ex : train) {
      if (ex.numerical.size() != d) {
        throw ShapeError("FeatureScaler: example " + ex.id + " has " +
                         std::to_string(ex.numerical.size()) + " features, expected " +
                         std::to_string(d));
      }
      axpy(1.0, ex.numerical, s.mean);
    }
    const double n = static_cast<double>(train.size());
    for (double& m : s.mean) m /= n;
    for (const auto& ex : train) {
      for (std::size_t i = 0; i < d; ++i) {
        const double dev = ex.numerical[i] - s.mean[i];
        s.stddev[i] += dev * dev;
      }
    }
    for (double& v : s.stddev) v = std::sqrt(v / n);
    return s;
  }

  std::size_t dim() const noexcept { return mean.size(); }
  bool is_constant(std::size_t i) const { return !(stddev[i] > 0.0); }

  Tensor1D transform(std::span<const double> x) const {
    if (x.size() != dim()) {
      throw ShapeError("FeatureScaler: got " + std::to_string(x.size()) + " features, expected " +
                       std::to_string(dim()));
    }
    Tensor1D out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = is_constant(i) ? 0.0 : (x[i] - mean[i]) / stddev[i];
    }
    return out;
  }
};

/// Concatenated one-hot blocks, one per categorical feature seen in train.
/// Categories are ordered lexicographically inside a block; features keep
/// their first-seen order. Unknown or missing values give an all-zero block.
struct OneHotEncoder {
  std::vector<std::pair<std::string, std::vector<std::string>>> features;

  static OneHotEncoder fit(std::span<const Example> train) {
    if (train.empty()) throw ArgumentError("OneHotEncoder: empty train split");
    std::vector<std::string> order;
    std::map<std::string, std::map<std::string, int>> seen;
    for (const auto& ex : train) {
      for (const auto& [name, value] : ex.categorical) {
        if (!seen.count(name)) order.push_back(name);
        seen[name][value] = 1;
      }
    }
    OneHotEncoder enc;
    for (const auto& name : order) {
      std::vector<std::string> cats;
      for (const auto& [value, unused] : seen[name]) cats.push_back(value);
      enc.features.emplace_back(name, std::move(cats));
    }
    return enc;
  }

  std::size_t dim() const {
    std::size_t n = 0;
    for (const auto& f : features) n += f.second.size();
    return n;
  }

  Tensor1D transform(std::span<const std::pair<std::string, std::string>> cats) const {
    Tensor1D out(dim(), 0.0);
    std::size_t offset = 0;
    for (const auto& [name, values] : features) {
      for (const auto& [n, v] : cats) {
        if (n != name) continue;
        const auto it = std::lower_bound(values.begin(), values.end(), v);
        if (it != values.end() && *it == v) {
          out[offset + static_cast<std::size_t>(it - values.begin())] = 1.0;
        }
        break;
      }
      offset += values.size();
    }
    return out;
  }
};

/// Scaler and encoder fitted together on a train split. `fit` only ever sees
/// the train split; other splits go through `transform`.
struct FeaturePipeline {
  FeatureScaler scaler;
  OneHotEncoder encoder;

  static FeaturePipeline fit(std::span<const Example> train) {
    return {FeatureScaler::fit(train), OneHotEncoder::fit(train)};
  }

  Tensor1D numerical(const Example& ex) const { return scaler.transform(ex.numerical); }
  Tensor1D categorical(const Example& ex) const { return encoder.transform(ex.categorical); }

  std::string to_json_string() const {
    nlohmann::ordered_json j;
    j["mean"] = scaler.mean;
    j["stddev"] = scaler.stddev;
    auto feats = nlohmann::ordered_json::array();
    for (const auto& [name, values] : encoder.features) {
      feats.push_back({{"name", name}, {"categories", values}});
    }
    j["categorical"] = std::move(feats);
    return j.dump();
  }

  static FeaturePipeline from_json_string(std::string_view s) {
    try {
      const auto j = nlohmann::ordered_json::parse(s);
      FeaturePipeline p;
      p.scaler.mean = j.at("mean").get<std::vector<double>>();
      p.scaler.stddev = j.at("stddev").get<std::vector<double>>();
      if (p.scaler.mean.size() != p.scaler.stddev.size()) {
        throw ParseError("feature pipeline: mean/stddev length mismatch", 0);
      }
      for (const auto& f : j.at("categorical")) {
        p.encoder.features.emplace_back(f.at("name").get<std::string>(),
                                        f.at("categories").get<std::vector<std::string>>());
      }
      return p;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("feature pipeline: ") + e.what(), 0);
    }
  }
};

struct TabularFeatures {
  Tensor1D numerical;
  Tensor1D categorical;
};

struct FittedFeatures {
  FeaturePipeline pipeline;
  /// One entry per split passed in, train first.
  std::vector<std::vector<TabularFeatures>> splits;
};

/// Fits on `train` and transforms `train` followed by every split in `others`.
inline FittedFeatures fit_transform_features(std::span<const Example> train,
                                             std::initializer_list<std::span<const Example>> others = {}) {
  if (train.empty()) throw ArgumentError("fit_transform_features: empty train split");
  FittedFeatures out{FeaturePipeline::fit(train), {}};
  auto apply = [&](std::span<const Example> xs) {
    std::vector<TabularFeatures> rows;
    rows.reserve(xs.size());
    for (const auto& ex : xs) rows.push_back({out.pipeline.numerical(ex), out.pipeline.categorical(ex)});
    out.splits.push_back(std::move(rows));
  };
  apply(train);
  for (auto s : others) apply(s);
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Stratified by label; each split's indices are returned in ascending order.
inline SplitIndices split_indices(std::span<const Example> data, std::array<double, 3> fractions,
                                  std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ArgumentError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");

  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = class_index(data[i].label);
    if (!c) throw ArgumentError("example " + data[i].id + " has unknown label '" + data[i].label + "'");
    by_class[*c].push_back(i);
  }

  Rng rng(seed);
  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> dest = {&out.train, &out.val, &out.test};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < fractions.size()) {
      throw ArgumentError("class '" + std::string(kClassNames[c]) + "' has " +
                          std::to_string(members.size()) + " examples, fewer than " +
                          std::to_string(fractions.size()) + " splits");
    }
    rng.shuffle(members);
    // Largest-remainder apportionment; ties go to the earlier split.
    const double n = static_cast<double>(members.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rema{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = fractions[s] * n;
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rema[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < members.size()) {
      std::size_t best = 0;
      for (std::size_t s = 1; s < 3; ++s) {
        if (rema[s] > rema[best] + 1e-12) best = s;
      }
      ++counts[best];
      rema[best] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) dest[s]->push_back(members[pos++]);
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

struct DatasetSplits {
  Dataset train, val, test;
};

inline DatasetSplits split(std::span<const Example> data, std::array<double, 3> fractions,
                           std::uint64_t seed) {
  const auto idx = split_indices(data, fractions, seed);
  auto pick = [&](const std::vector<std::size_t>& ids) {
    Dataset d;
    d.reserve(ids.size());
    for (auto i : ids) d.push_back(data[i]);
    return d;
  };
  return {pick(idx.train), pick(idx.val), pick(idx.test)};
}

// ---------------------------------------------------------------------------
// Encoding into network inputs

/// Normalizes, tokenizes and embeds raw text.
class TextEncoder {
 public:
  TextEncoder(const EmbeddingTable& table, std::size_t max_seq_len)
      : table_(&table), max_seq_len_(max_seq_len) {}

  EmbeddedSequence operator()(std::string_view raw) const {
    return embed_sequence(*table_, tokenize(normalize(raw), max_seq_len_), max_seq_len_);
  }

 private:
  const EmbeddingTable* table_;
  std::size_t max_seq_len_;
};

struct LabeledInput {
  ModelInput input;
  std::size_t label = 0;
};

/// `text` may be null for models without a text branch; the text field is
/// then left empty.
inline std::vector<LabeledInput> encode_examples(std::span<const Example> data,
                                                 const FeaturePipeline& pipeline,
                                                 const TextEncoder* text) {
  std::vector<LabeledInput> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    LabeledInput li;
    li.input.id = ex.id;
    li.input.numerical = pipeline.numerical(ex);
    li.input.categorical = pipeline.categorical(ex);
    if (text) li.input.text = (*text)(ex.text);
    const auto c = class_index(ex.label);
    if (!c) throw ArgumentError("example " + ex.id + " has unknown label '" + ex.label + "'");
    li.label = *c;
    out.push_back(std::move(li));
  }
  return out;
}

}  // namespace fusenet
