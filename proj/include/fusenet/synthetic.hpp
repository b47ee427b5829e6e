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

// Synthetic inquiry generator with a planted text x signal interaction.
//
// Every class owns a (text pool, signal profile) pair and no two classes own
// the same pair. Two groups are deliberately confusable for one source:
//
//   * five classes share ONE signal profile and differ only in text, so a
//     tabular-only model can at best put 3 of the 5 in its top 3;
//   * five other classes share ONE text pool and differ only in signals,
//     which blinds a text-only model the same way.
//
// The remaining three classes are unique in both sources. With probability
// `noise` an example's text pool (and, independently, its signal profile) is
// replaced by that of a uniformly drawn class.
//
// The manifest records the tables and the Bayes-optimal top-1/top-3
// accuracy of each source, computed by enumerating the tables under the
// assumption that pool and profile identity are recoverable from an example
// (pools have disjoint keywords, profiles are well separated).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/embed.hpp"
#include "fusenet/numcore.hpp"
#include "json.hpp"

namespace fusenet {

struct SyntheticConfig {
  std::size_t n = 1300;
  double noise = 0.05;
  std::uint64_t seed = 5;
  std::size_t num_features = 20;
  /// Empty means uniform. Otherwise one non-negative weight per class.
  std::vector<double> class_priors;
};

struct SyntheticDataset {
  Dataset examples;
  nlohmann::ordered_json manifest;
};

namespace synth {

struct TextPool {
  std::string_view name;
  std::vector<std::string_view> templates;
};

inline const std::vector<TextPool>& text_pools() {
  static const std::vector<TextPool> pools = {
      {"cost",
       {"can you explain how much this loan will cost me in total",
        "what is the fixed fee on my loan and how is it calculated",
        "I'd like to understand the total cost of the financing",
        "why is the fee {amount} on a loan of {amount}"}},
      {"status",
       {"I have a question about my account, can you tell me what is going on",
        "I got an email about my loan on {date} and I'm not sure what it means",
        "please explain the status of my account, you can reach me at {phone}",
        "what is happening with my loan? contact me at {email}"}},
      {"payoff",
       {"can I pay off the remaining balance early",
        "I want to repay the whole loan now, is there a penalty",
        "how do I make a lump sum payment of {amount} to close my loan",
        "is there a discount for paying off ahead of schedule"}},
      {"edit",
       {"I already accepted my offer but I want to change the amount",
        "can I modify my application after accepting it on {date}",
        "I made a mistake on my submitted application, can I edit it",
        "is it possible to update the loan terms I accepted"}},
      {"funds",
       {"when will the money arrive in my bank account",
        "how long does it take for the funds to be deposited",
        "I was approved on {date}, when do I receive the deposit",
        "the transfer hasn't shown up yet, what is the eta"}},
      {"enroll",
       {"how do I sign up for a loan offer",
        "I can't find where to apply for the financing in my dashboard",
        "what are the steps to enroll in the loan program",
        "please walk me through the application process"}},
      {"minimum",
       {"what is the minimum payment I need to make every period",
        "I didn't meet the minimum repayment, what happens now",
        "how much do I have to repay each sixty days",
        "is there a required minimum amount per payment cycle"}},
      {"credit",
       {"will you run a credit check if I apply",
        "does applying affect my credit score or credit report",
        "do you pull my credit history from the bureaus",
        "I don't want a hard inquiry on my credit"}},
      {"other",
       {"how do I change the email on my receipts",
        "my card reader is not connecting to bluetooth",
        "can you help me update my business hours",
        "I need a copy of my tax form from last year"}},
  };
  return pools;
}

inline constexpr std::array<std::string_view, 5> kLoanStatus = {"none", "offered", "active", "declined",
                                                                "paid_off"};
inline constexpr std::array<std::string_view, 3> kTier = {"standard", "plus", "premium"};
inline constexpr std::array<std::string_view, 3> kDevice = {"ios", "android", "web"};

struct ClassPlan {
  std::size_t text_pool;
  std::size_t profile;
};

// Indexed like kClassNames. Profile 0 is shared by the text-disambiguated
// group; pool 1 ("status") by the signal-disambiguated group.
inline constexpr std::array<ClassPlan, 13> kPlan = {{
    {0, 0},  // Cost Explanation
    {1, 1},  // Decline Follow Up
    {2, 2},  // Early Payoff
    {3, 0},  // Edit Offer if Already Accepted
    {4, 3},  // Funds ETA
    {5, 0},  // How to Enroll
    {1, 4},  // Increase Options
    {6, 0},  // Minimum Repayment Requirement
    {1, 5},  // Not Eligible for Renewal
    {1, 6},  // Renewal Eligibility
    {7, 0},  // No Credit Check
    {1, 7},  // Plan Completed
    {8, 8},  // Other
}};

inline constexpr std::size_t kNumProfiles = 9;
// Dominant loan_status value per profile (index into kLoanStatus).
inline constexpr std::array<std::size_t, kNumProfiles> kProfileStatus = {1, 3, 2, 1, 2, 2, 2, 4, 0};

inline constexpr double kSignalSpread = 2.0;  // profile means ~ U(-2, 2)
inline constexpr double kSignalNoise = 0.5;   // per-example Gaussian noise
inline constexpr double kStatusFidelity = 0.9;

inline constexpr std::array<std::string_view, 12> kMonths = {
    "January", "February", "March", "April", "May", "June", "July", "August",
    "September", "October", "November", "December"};
inline constexpr std::array<std::string_view, 5> kOpeners = {"", "hello,", "hi there.", "good morning!",
                                                             "hey team,"};
inline constexpr std::array<std::string_view, 5> kClosers = {"", "thanks.", "thank you!", "best regards",
                                                             "appreciate it."};

inline std::string fill_slots(std::string_view tmpl, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i++]);
      continue;
    }
    const auto close = tmpl.find('}', i);
    const auto slot = tmpl.substr(i + 1, close - i - 1);
    i = close + 1;
    char buf[64];
    if (slot == "amount") {
      const auto dollars = 100 + rng.uniform_int(49900);
      const auto cents = rng.uniform_int(100);
      if (dollars >= 1000) {
        std::snprintf(buf, sizeof buf, "$%llu,%03llu.%02llu",
                      static_cast<unsigned long long>(dollars / 1000),
                      static_cast<unsigned long long>(dollars % 1000),
                      static_cast<unsigned long long>(cents));
      } else {
        std::snprintf(buf, sizeof buf, "$%llu", static_cast<unsigned long long>(dollars));
      }
    } else if (slot == "date") {
      const auto month = rng.uniform_int(12);
      const auto day = 1 + rng.uniform_int(28);
      const auto year = 2015 + rng.uniform_int(5);
      if (rng.bernoulli(0.5)) {
        std::snprintf(buf, sizeof buf, "%s %llu, %llu", std::string(kMonths[month]).c_str(),
                      static_cast<unsigned long long>(day), static_cast<unsigned long long>(year));
      } else {
        std::snprintf(buf, sizeof buf, "%02llu/%02llu/%llu", static_cast<unsigned long long>(month + 1),
                      static_cast<unsigned long long>(day), static_cast<unsigned long long>(year));
      }
    } else if (slot == "phone") {
      std::snprintf(buf, sizeof buf, "(%03llu) %03llu-%04llu",
                    static_cast<unsigned long long>(200 + rng.uniform_int(800)),
                    static_cast<unsigned long long>(200 + rng.uniform_int(800)),
                    static_cast<unsigned long long>(rng.uniform_int(10000)));
    } else if (slot == "email") {
      std::snprintf(buf, sizeof buf, "seller%llu@example.com",
                    static_cast<unsigned long long>(rng.uniform_int(10000)));
    } else {
      throw ArgumentError("unknown template slot {" + std::string(slot) + "}");
    }
    out += buf;
  }
  return out;
}

/// P(observed group | class) with replacement probability `noise`.
inline double observe_prob(std::size_t observed, std::size_t own, std::size_t group_members,
                           double noise) {
  return (observed == own ? 1.0 - noise : 0.0) +
         noise * static_cast<double>(group_members) / static_cast<double>(kNumClasses);
}

struct Ceilings {
  double top1 = 0.0;
  double top3 = 0.0;
};

/// Bayes-optimal top-1 / top-3 accuracy from joint P(class, observation)
/// tables, one row per observation.
inline Ceilings ceilings_from_joint(const std::vector<std::array<double, kNumClasses>>& joint) {
  Ceilings c;
  for (auto row : joint) {
    std::sort(row.begin(), row.end(), std::greater<>());
    c.top1 += row[0];
    c.top3 += row[0] + row[1] + row[2];
  }
  return c;
}

}  // namespace synth

/// Exact class counts from priors by largest remainder (ties to lower index).
inline std::array<std::size_t, kNumClasses> class_counts(std::size_t n, const std::vector<double>& priors) {
  std::array<double, kNumClasses> w{};
  if (priors.empty()) {
    w.fill(1.0);
  } else {
    if (priors.size() != kNumClasses) throw ArgumentError("class_priors needs 13 entries");
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (!(priors[c] >= 0.0)) throw ArgumentError("class_priors must be non-negative");
      w[c] = priors[c];
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw ArgumentError("class_priors sum to zero");
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> rema{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = static_cast<double>(n) * w[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    rema[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (rema[c] > rema[best]) best = c;
    }
    ++counts[best];
    rema[best] = -1.0;
    ++assigned;
  }
  return counts;
}

inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  using namespace synth;
  if (cfg.n < kNumClasses * 10) {
    throw ArgumentError("generate_synthetic: n must be >= " + std::to_string(kNumClasses * 10));
  }
  if (!(cfg.noise >= 0.0 && cfg.noise < 1.0)) {
    throw ArgumentError("generate_synthetic: noise must be in [0, 1)");
  }
  if (cfg.num_features < 1) throw ArgumentError("generate_synthetic: num_features must be >= 1");

  Rng rng(cfg.seed);
  std::vector<std::vector<double>> profile_mean(kNumProfiles);
  for (auto& mu : profile_mean) {
    mu.resize(cfg.num_features);
    for (double& v : mu) v = rng.uniform(-kSignalSpread, kSignalSpread);
  }

  const auto counts = class_counts(cfg.n, cfg.class_priors);
  std::vector<std::size_t> labels;
  labels.reserve(cfg.n);
  for (std::size_t c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), counts[c], c);
  rng.shuffle(labels);

  const auto& pools = text_pools();
  SyntheticDataset out;
  out.examples.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t c = labels[i];
    std::size_t pool = kPlan[c].text_pool;
    std::size_t profile = kPlan[c].profile;
    if (rng.bernoulli(cfg.noise)) pool = kPlan[rng.uniform_int(kNumClasses)].text_pool;
    if (rng.bernoulli(cfg.noise)) profile = kPlan[rng.uniform_int(kNumClasses)].profile;

    const auto& tmpls = pools[pool].templates;
    std::string body = fill_slots(tmpls[rng.uniform_int(tmpls.size())], rng);
    const auto opener = kOpeners[rng.uniform_int(kOpeners.size())];
    const auto closer = kClosers[rng.uniform_int(kClosers.size())];
    std::string text;
    if (!opener.empty()) text += std::string(opener) + " ";
    text += body;
    if (!closer.empty()) text += " " + std::string(closer);

    Example ex;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i + 1);
    ex.id = id;
    ex.text = std::move(text);
    ex.numerical.resize(cfg.num_features);
    for (std::size_t f = 0; f < cfg.num_features; ++f) {
      ex.numerical[f] = profile_mean[profile][f] + rng.normal(0.0, kSignalNoise);
    }
    const std::size_t status = rng.bernoulli(kStatusFidelity)
                                   ? kProfileStatus[profile]
                                   : static_cast<std::size_t>(rng.uniform_int(kLoanStatus.size()));
    ex.categorical = {{"loan_status", std::string(kLoanStatus[status])},
                      {"account_tier", std::string(kTier[rng.uniform_int(kTier.size())])},
                      {"device", std::string(kDevice[rng.uniform_int(kDevice.size())])}};
    ex.label = std::string(kClassNames[c]);
    out.examples.push_back(std::move(ex));
  }

  // Manifest: tables plus enumerated single-source ceilings.
  std::array<double, kNumClasses> prior{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    prior[c] = static_cast<double>(counts[c]) / static_cast<double>(cfg.n);
  }
  std::vector<std::size_t> pool_members(pools.size(), 0), profile_members(kNumProfiles, 0);
  for (const auto& p : kPlan) {
    ++pool_members[p.text_pool];
    ++profile_members[p.profile];
  }
  std::vector<std::array<double, kNumClasses>> text_joint(pools.size()), signal_joint(kNumProfiles),
      fusion_joint(pools.size() * kNumProfiles);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t t = 0; t < pools.size(); ++t) {
      const double pt = observe_prob(t, kPlan[c].text_pool, pool_members[t], cfg.noise);
      text_joint[t][c] = prior[c] * pt;
      for (std::size_t s = 0; s < kNumProfiles; ++s) {
        const double ps = observe_prob(s, kPlan[c].profile, profile_members[s], cfg.noise);
        fusion_joint[t * kNumProfiles + s][c] = prior[c] * pt * ps;
      }
    }
    for (std::size_t s = 0; s < kNumProfiles; ++s) {
      signal_joint[s][c] = prior[c] * observe_prob(s, kPlan[c].profile, profile_members[s], cfg.noise);
    }
  }
  const auto text_c = ceilings_from_joint(text_joint);
  const auto signal_c = ceilings_from_joint(signal_joint);
  const auto fusion_c = ceilings_from_joint(fusion_joint);

  nlohmann::ordered_json m;
  m["version"] = 1;
  m["n"] = cfg.n;
  m["noise"] = cfg.noise;
  m["seed"] = cfg.seed;
  m["num_features"] = cfg.num_features;
  m["classes"] = kClassNames;
  auto pools_json = nlohmann::ordered_json::object();
  for (const auto& p : pools) pools_json[std::string(p.name)] = p.templates;
  m["text_pools"] = std::move(pools_json);
  auto profiles_json = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < kNumProfiles; ++s) {
    profiles_json.push_back({{"id", s},
                             {"loan_status", kLoanStatus[kProfileStatus[s]]},
                             {"mean", profile_mean[s]}});
  }
  m["signal_profiles"] = std::move(profiles_json);
  m["signal_noise_stddev"] = kSignalNoise;
  auto plan = nlohmann::ordered_json::array();
  auto text_pairs = nlohmann::ordered_json::array();
  auto signal_pairs = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    plan.push_back({{"class", kClassNames[c]},
                    {"text_pool", pools[kPlan[c].text_pool].name},
                    {"signal_profile", kPlan[c].profile},
                    {"count", counts[c]}});
    for (std::size_t d = c + 1; d < kNumClasses; ++d) {
      if (kPlan[c].text_pool == kPlan[d].text_pool) text_pairs.push_back({kClassNames[c], kClassNames[d]});
      if (kPlan[c].profile == kPlan[d].profile) signal_pairs.push_back({kClassNames[c], kClassNames[d]});
    }
  }
  m["class_plan"] = std::move(plan);
  // Pairs a text-only model cannot separate (need signals) and vice versa.
  m["shared_text_pairs"] = std::move(text_pairs);
  m["shared_signal_pairs"] = std::move(signal_pairs);
  m["ceilings"] = {
      {"text", {{"top1", text_c.top1}, {"top3", text_c.top3}}},
      {"signals", {{"top1", signal_c.top1}, {"top3", signal_c.top3}}},
      {"fusion", {{"top1", fusion_c.top1}, {"top3", fusion_c.top3}}},
  };
  out.manifest = std::move(m);
  return out;
}

/// Random word vectors for every token the normalizer/tokenizer produces on
/// `data`, sorted by word. Vectors are N(0, 1) per component.
inline EmbeddingTable synthetic_embeddings(std::span<const Example> data, std::size_t dim,
                                           std::uint64_t seed) {
  std::map<std::string, int> vocab;
  for (const auto& ex : data) {
    for (auto& tok : tokenize(normalize(ex.text), SIZE_MAX).tokens) vocab.emplace(std::move(tok), 0);
  }
  for (const auto& pool : synth::text_pools()) {
    for (auto t : pool.templates) {
      for (auto& tok : tokenize(normalize(t), SIZE_MAX).tokens) vocab.emplace(std::move(tok), 0);
    }
  }
  Rng rng(Rng::derive(seed, 0x656d62));
  std::vector<std::string> words;
  Tensor2D matrix(vocab.size(), dim);
  std::size_t r = 0;
  for (const auto& [word, unused] : vocab) {
    words.push_back(word);
    for (double& v : matrix.row(r)) v = rng.normal();
    ++r;
  }
  return EmbeddingTable(std::move(words), std::move(matrix));
}

}  // namespace fusenet
