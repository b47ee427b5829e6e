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

// Top-k metrics.
//
//   recall_k(c)  = (1 / n_c) * sum over ALL cases i of [Y_i in top_k(i)] * [Y_i == c]
//   accuracy_k   = (1 / n)   * sum over all cases of [Y_i in top_k(i)]
//
// Recall for a class with no cases is undefined and reported as such, which
// keeps accuracy_k == sum_c (n_c / n) * recall_k(c) exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/fusion.hpp"
#include "fusenet/parallel.hpp"
#include "json.hpp"

namespace fusenet {

using TopK = std::vector<std::size_t>;

namespace detail {

inline void check_predictions(std::span<const TopK> preds, std::span<const std::size_t> labels) {
  if (preds.size() != labels.size()) {
    throw ArgumentError("predictions (" + std::to_string(preds.size()) + ") and labels (" +
                        std::to_string(labels.size()) + ") differ in length");
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    TopK sorted = preds[i];
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() ||
        preds[i].size() != preds.front().size()) {
      throw ArgumentError("prediction " + std::to_string(i) + " is not a list of k distinct classes");
    }
  }
}

inline bool hit(const TopK& pred, std::size_t label) {
  return std::find(pred.begin(), pred.end(), label) != pred.end();
}

}  // namespace detail

/// nullopt when the class has no cases.
inline std::optional<double> topk_recall(std::span<const TopK> preds, std::span<const std::size_t> labels,
                                         std::size_t cls) {
  detail::check_predictions(preds, labels);
  std::size_t n_k = 0, hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != cls) continue;
    ++n_k;
    if (detail::hit(preds[i], labels[i])) ++hits;
  }
  if (n_k == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(n_k);
}

inline double topk_accuracy(std::span<const TopK> preds, std::span<const std::size_t> labels) {
  detail::check_predictions(preds, labels);
  if (labels.empty()) throw ArgumentError("topk_accuracy: no cases");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += detail::hit(preds[i], labels[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::size_t k = 3;
  std::size_t n = 0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> n_k;
  std::vector<std::size_t> hits;
  std::vector<std::optional<double>> recall;
  double accuracy = 0.0;

  /// |accuracy - sum_c (n_c/n) recall_c|.
  double identity_gap() const {
    double s = 0.0;
    for (std::size_t c = 0; c < recall.size(); ++c) {
      if (recall[c]) s += static_cast<double>(n_k[c]) / static_cast<double>(n) * *recall[c];
    }
    return std::abs(accuracy - s);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["version"] = kSchemaVersion;
    j["k"] = k;
    j["n"] = n;
    auto per = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      nlohmann::ordered_json row;
      row["name"] = class_names[c];
      row["n_k"] = n_k[c];
      row["recall"] = recall[c] ? nlohmann::ordered_json(*recall[c]) : nlohmann::ordered_json(nullptr);
      per.push_back(std::move(row));
    }
    j["per_class"] = std::move(per);
    j["accuracy"] = accuracy;
    return j;
  }

  static EvalReport from_json(const nlohmann::ordered_json& j) {
    try {
      if (j.at("version").get<int>() != kSchemaVersion) {
        throw ParseError("report schema version " + j.at("version").dump() + " unsupported", 0);
      }
      EvalReport r;
      r.k = j.at("k").get<std::size_t>();
      r.n = j.at("n").get<std::size_t>();
      r.accuracy = j.at("accuracy").get<double>();
      for (const auto& row : j.at("per_class")) {
        r.class_names.push_back(row.at("name").get<std::string>());
        r.n_k.push_back(row.at("n_k").get<std::size_t>());
        const auto& rec = row.at("recall");
        if (rec.is_null()) {
          r.recall.emplace_back(std::nullopt);
          r.hits.push_back(0);
        } else {
          const double v = rec.get<double>();
          if (v < 0.0 || v > 1.0) throw ParseError("recall outside [0, 1]", 0);
          r.recall.emplace_back(v);
          r.hits.push_back(static_cast<std::size_t>(std::llround(v * static_cast<double>(r.n_k.back()))));
        }
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("report: ") + e.what(), 0);
    }
  }
};

inline EvalReport make_report(std::span<const TopK> preds, std::span<const std::size_t> labels, std::size_t k,
                              std::size_t num_classes) {
  detail::check_predictions(preds, labels);
  if (labels.empty()) throw ArgumentError("report: no cases");
  EvalReport r;
  r.k = k;
  r.n = labels.size();
  r.n_k.assign(num_classes, 0);
  r.hits.assign(num_classes, 0);
  std::size_t total_hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw ArgumentError("label out of range");
    ++r.n_k[labels[i]];
    if (detail::hit(preds[i], labels[i])) {
      ++r.hits[labels[i]];
      ++total_hits;
    }
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    r.class_names.push_back(num_classes == kNumClasses ? std::string(kClassNames[c])
                                                       : "class_" + std::to_string(c));
    r.recall.push_back(r.n_k[c] == 0 ? std::nullopt
                                     : std::optional<double>(static_cast<double>(r.hits[c]) /
                                                             static_cast<double>(r.n_k[c])));
  }
  r.accuracy = static_cast<double>(total_hits) / static_cast<double>(r.n);
  return r;
}

/// Top-k prediction for every case, fanned out over `threads` workers.
inline std::vector<TopK> predict_all(const FusionModel& model, std::span<const LabeledInput> data, std::size_t k,
                                     std::size_t threads = default_thread_count()) {
  std::vector<TopK> preds(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { preds[i] = predict_topk(model, data[i].input, k).top_k; });
  return preds;
}

inline EvalReport report(const FusionModel& model, std::span<const LabeledInput> data, std::size_t k = 3,
                         std::size_t threads = default_thread_count()) {
  const auto preds = predict_all(model, data, k, threads);
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const auto& d : data) labels.push_back(d.label);
  return make_report(preds, labels, k, model.config.num_classes);
}

inline void write_report(const std::string& path, const EvalReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report " + path);
  out << r.to_json().dump(2) << '\n';
  if (!out) throw Error("write failed for " + path);
}

inline EvalReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report " + path);
  try {
    return EvalReport::from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

}  // namespace fusenet
