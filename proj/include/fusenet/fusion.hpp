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

// The attention fusion network and its two single-source baselines.
//
//   numerical   -> dense -> dense ----------------------.
//   categorical -> dense -> dense ----------------------+--> concat -> softmax
//   text -> embeddings -> BiLSTM -> feedforward attention'
//
// Branch outputs are always concatenated in the order
// [numerical, categorical, text]; baselines drop the absent branches and the
// head shrinks accordingly.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <vector>

#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/nn.hpp"
#include "fusenet/numcore.hpp"

namespace fusenet {

enum class Variant { fusion, mlp_only, text_only };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::fusion: return "fusion";
    case Variant::mlp_only: return "mlp";
    case Variant::text_only: return "text";
  }
  return "fusion";
}

inline Variant variant_from_string(std::string_view s) {
  if (s == "fusion") return Variant::fusion;
  if (s == "mlp") return Variant::mlp_only;
  if (s == "text") return Variant::text_only;
  throw ArgumentError("unknown model variant '" + std::string(s) + "'");
}

inline bool uses_tabular(Variant v) { return v != Variant::text_only; }
inline bool uses_text(Variant v) { return v != Variant::mlp_only; }

struct ModelConfig {
  std::size_t num_feature_dim = 20;
  std::size_t cat_feature_dim = 8;
  std::size_t embed_dim = 300;
  std::size_t lstm_hidden = 64;  // per direction
  std::size_t mlp_hidden = 64;   // width of both hidden layers in each branch
  std::size_t num_classes = 13;
  std::size_t max_seq_len = 100;
  Activation mlp_activation = Activation::relu;
  std::uint64_t seed = 1;

  void validate() const {
    auto need = [](std::size_t v, const char* name, std::size_t min) {
      if (v < min) {
        throw ConfigError(std::string(name) + " must be >= " + std::to_string(min) +
                          ", got " + std::to_string(v));
      }
    };
    need(num_feature_dim, "num_feature_dim", 1);
    need(cat_feature_dim, "cat_feature_dim", 1);
    need(embed_dim, "embed_dim", 1);
    need(lstm_hidden, "lstm_hidden", 1);
    need(mlp_hidden, "mlp_hidden", 1);
    need(num_classes, "num_classes", 2);
    need(max_seq_len, "max_seq_len", 1);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using MlpBranch = std::array<DenseLayer, 2>;

struct FusionModel {
  static constexpr int kFormatVersion = 1;
  static constexpr std::string_view kBranchOrder = "numerical,categorical,text";

  Variant variant = Variant::fusion;
  ModelConfig config;
  std::optional<MlpBranch> mlp_num;
  std::optional<MlpBranch> mlp_cat;
  std::optional<BiLstmEncoder> encoder;
  std::optional<FeedforwardAttention> attention;
  DenseLayer head;
  /// Free-form single-line key/value pairs carried through save/load.
  std::map<std::string, std::string> metadata;

  std::size_t tabular_out_dim() const {
    return (mlp_num ? (*mlp_num)[1].out_dim() : 0) + (mlp_cat ? (*mlp_cat)[1].out_dim() : 0);
  }
  std::size_t text_out_dim() const { return encoder ? encoder->output_dim() : 0; }
  std::size_t head_input_dim() const { return tabular_out_dim() + text_out_dim(); }

  /// Checks every shape against the config and against each other.
  void validate() const {
    config.validate();
    auto check_branch = [&](const std::optional<MlpBranch>& br, const char* name,
                            std::size_t in) {
      const bool want = uses_tabular(variant);
      if (br.has_value() != want) {
        throw ShapeError(std::string(name) + (want ? " missing" : " present") +
                         " for variant " + std::string(to_string(variant)));
      }
      if (!br) return;
      (*br)[0].validate(std::string(name) + ".0");
      (*br)[1].validate(std::string(name) + ".1");
      if ((*br)[0].in_dim() != in || (*br)[0].out_dim() != config.mlp_hidden ||
          (*br)[1].in_dim() != config.mlp_hidden || (*br)[1].out_dim() != config.mlp_hidden) {
        throw ShapeError(std::string(name) + ": layers " + (*br)[0].W.shape() + ", " +
                         (*br)[1].W.shape() + " inconsistent with config");
      }
    };
    check_branch(mlp_num, "mlp_num", config.num_feature_dim);
    check_branch(mlp_cat, "mlp_cat", config.cat_feature_dim);

    const bool want_text = uses_text(variant);
    if (encoder.has_value() != want_text || attention.has_value() != want_text) {
      throw ShapeError(std::string("text branch ") + (want_text ? "missing" : "present") +
                       " for variant " + std::string(to_string(variant)));
    }
    if (encoder) {
      encoder->validate("encoder");
      attention->validate("attention");
      if (encoder->input_dim() != config.embed_dim ||
          encoder->hidden_dim() != config.lstm_hidden) {
        throw ShapeError("encoder: gate matrix " + encoder->forward_cell.W_i.shape() +
                         " inconsistent with embed_dim " + std::to_string(config.embed_dim) +
                         ", lstm_hidden " + std::to_string(config.lstm_hidden));
      }
      if (attention->dim() != encoder->output_dim()) {
        throw ShapeError("attention: w " + shape_str(attention->dim()) +
                         " for encoder output " + shape_str(encoder->output_dim()));
      }
    }
    head.validate("head");
    if (head.activation != Activation::identity) {
      throw ShapeError("head: activation must be identity");
    }
    if (head.in_dim() != head_input_dim() || head.out_dim() != config.num_classes) {
      throw ShapeError("head: W " + head.W.shape() + ", expected " +
                       shape_str(head_input_dim(), config.num_classes));
    }
  }
};

/// Gradient storage mirroring a FusionModel's parameter layout.
struct FusionGrads {
  std::optional<std::array<DenseGrads, 2>> mlp_num;
  std::optional<std::array<DenseGrads, 2>> mlp_cat;
  std::optional<BiLstmGrads> encoder;
  std::optional<AttentionGrads> attention;
  DenseGrads head;

  FusionGrads() = default;
  explicit FusionGrads(const FusionModel& m) : head(m.head) {
    if (m.mlp_num) mlp_num = {DenseGrads((*m.mlp_num)[0]), DenseGrads((*m.mlp_num)[1])};
    if (m.mlp_cat) mlp_cat = {DenseGrads((*m.mlp_cat)[0]), DenseGrads((*m.mlp_cat)[1])};
    if (m.encoder) encoder.emplace(*m.encoder);
    if (m.attention) attention.emplace(*m.attention);
  }
};

namespace detail {

template <class F, class T>
void visit_tensor(F& f, const std::string& name, T& t) {
  using U = std::remove_const_t<T>;
  if constexpr (std::is_same_v<U, Tensor2D>) {
    f(name, t.values(), t.rows(), t.cols());
  } else if constexpr (std::is_same_v<U, Tensor1D>) {
    f(name, std::span(t), std::size_t{1}, t.size());
  } else {
    static_assert(std::is_same_v<U, double>);
    f(name, std::span(&t, 1), std::size_t{1}, std::size_t{1});
  }
}

template <class F, class D>
void visit_dense(F& f, const std::string& p, D& d) {
  visit_tensor(f, p + ".W", d.W);
  visit_tensor(f, p + ".b", d.b);
}

template <class F, class C>
void visit_lstm(F& f, const std::string& p, C& c) {
  visit_tensor(f, p + ".W_i", c.W_i);
  visit_tensor(f, p + ".W_f", c.W_f);
  visit_tensor(f, p + ".W_o", c.W_o);
  visit_tensor(f, p + ".W_q", c.W_q);
  visit_tensor(f, p + ".b_i", c.b_i);
  visit_tensor(f, p + ".b_f", c.b_f);
  visit_tensor(f, p + ".b_o", c.b_o);
  visit_tensor(f, p + ".b_q", c.b_q);
}

}  // namespace detail

/// Calls f(name, values, rows, cols) for every parameter block in a fixed
/// order. Works on FusionModel and FusionGrads (const or not), so parameter
/// and gradient blocks line up one-to-one.
template <class M, class F>
void for_each_block(M& m, F&& f) {
  for (auto [branch, name] : {std::pair{&m.mlp_num, "mlp_num"}, std::pair{&m.mlp_cat, "mlp_cat"}}) {
    if (*branch) {
      detail::visit_dense(f, std::string(name) + ".0", (**branch)[0]);
      detail::visit_dense(f, std::string(name) + ".1", (**branch)[1]);
    }
  }
  if (m.encoder) {
    detail::visit_lstm(f, "encoder.forward", m.encoder->forward_cell);
    detail::visit_lstm(f, "encoder.backward", m.encoder->backward_cell);
  }
  if (m.attention) {
    detail::visit_tensor(f, "attention.w", m.attention->w);
    detail::visit_tensor(f, "attention.b", m.attention->b);
  }
  detail::visit_dense(f, "head", m.head);
}

template <class M>
std::size_t parameter_count(M& m) {
  std::size_t n = 0;
  for_each_block(m, [&](const std::string&, auto values, std::size_t, std::size_t) {
    n += values.size();
  });
  return n;
}

template <class M>
void fill_blocks(M& m, double v) {
  for_each_block(m, [&](const std::string&, auto values, std::size_t, std::size_t) {
    std::fill(values.begin(), values.end(), v);
  });
}

namespace detail {

inline FusionModel build_variant(Variant variant, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  FusionModel m;
  m.variant = variant;
  m.config = cfg;
  if (uses_tabular(variant)) {
    m.mlp_num = MlpBranch{
        DenseLayer::glorot(cfg.num_feature_dim, cfg.mlp_hidden, cfg.mlp_activation, rng),
        DenseLayer::glorot(cfg.mlp_hidden, cfg.mlp_hidden, cfg.mlp_activation, rng)};
    m.mlp_cat = MlpBranch{
        DenseLayer::glorot(cfg.cat_feature_dim, cfg.mlp_hidden, cfg.mlp_activation, rng),
        DenseLayer::glorot(cfg.mlp_hidden, cfg.mlp_hidden, cfg.mlp_activation, rng)};
  }
  if (uses_text(variant)) {
    m.encoder = BiLstmEncoder::glorot(cfg.embed_dim, cfg.lstm_hidden, rng);
    m.attention = FeedforwardAttention::glorot(2 * cfg.lstm_hidden, rng);
  }
  m.head = DenseLayer::glorot(m.head_input_dim(), cfg.num_classes, Activation::identity, rng);
  m.validate();
  return m;
}

}  // namespace detail

inline FusionModel build(const ModelConfig& cfg, Rng& rng) {
  return detail::build_variant(Variant::fusion, cfg, rng);
}
inline FusionModel build_mlp_only(const ModelConfig& cfg, Rng& rng) {
  return detail::build_variant(Variant::mlp_only, cfg, rng);
}
inline FusionModel build_text_only(const ModelConfig& cfg, Rng& rng) {
  return detail::build_variant(Variant::text_only, cfg, rng);
}
inline FusionModel build(Variant v, const ModelConfig& cfg, Rng& rng) {
  return detail::build_variant(v, cfg, rng);
}
/// Seeds from cfg.seed.
inline FusionModel build(Variant v, const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  return detail::build_variant(v, cfg, rng);
}

// ---------------------------------------------------------------------------
// Forward / backward

/// One case as the network consumes it.
struct ModelInput {
  std::string id;
  Tensor1D numerical;
  Tensor1D categorical;
  EmbeddedSequence text;
};

struct ForwardOptions {
  /// Inverted dropout on each branch output; needs `rng` when > 0.
  double dropout_rate = 0.0;
  Rng* rng = nullptr;
};

struct FusionCache {
  std::array<DenseCache, 2> num;
  std::array<DenseCache, 2> cat;
  BiLstmCache lstm;
  AttentionCache attn;
  Tensor1D alphas;
  Tensor1D dropout_scale;  // per concatenated unit; empty when dropout is off
  ClassifierOutput head;
};

struct ForwardResult {
  Tensor1D probs;
  FusionCache cache;
};

inline ForwardResult forward(const FusionModel& m, std::span<const double> num_x,
                             std::span<const double> cat_x, const EmbeddedSequence& seq,
                             const ForwardOptions& opts = {}, std::string_view example_id = {}) {
  ForwardResult r;
  FusionCache& k = r.cache;
  Tensor1D c;
  c.reserve(m.head_input_dim());

  auto run_branch = [&](const MlpBranch& br, std::span<const double> x,
                        std::array<DenseCache, 2>& caches, std::string_view name) {
    if (x.size() != br[0].in_dim()) {
      throw ShapeError(std::string(name) + " branch: input " + shape_str(x.size()) +
                       ", expected " + shape_str(br[0].in_dim()));
    }
    auto h1 = dense_forward(br[0], x);
    auto h2 = dense_forward(br[1], h1.y);
    c.insert(c.end(), h2.y.begin(), h2.y.end());
    caches = {std::move(h1.cache), std::move(h2.cache)};
  };
  if (m.mlp_num) run_branch(*m.mlp_num, num_x, k.num, "numerical");
  if (m.mlp_cat) run_branch(*m.mlp_cat, cat_x, k.cat, "categorical");

  if (m.encoder) {
    if (seq.vectors.cols() != m.encoder->input_dim()) {
      throw ShapeError("text branch: embeddings " + seq.vectors.shape() + ", expected width " +
                       std::to_string(m.encoder->input_dim()));
    }
    auto enc = bilstm_forward(*m.encoder, seq.vectors);
    try {
      auto att = attention_forward(*m.attention, enc.H, seq.mask);
      c.insert(c.end(), att.a.begin(), att.a.end());
      k.alphas = std::move(att.alphas);
      k.attn = std::move(att.cache);
    } catch (const NoAttendablePositions& e) {
      if (example_id.empty()) throw;
      throw NoAttendablePositions(std::string(e.what()) + " (example " +
                                  std::string(example_id) + ")");
    }
    k.lstm = std::move(enc.cache);
  }

  if (opts.dropout_rate > 0.0) {
    if (opts.rng == nullptr) throw ArgumentError("dropout requires an rng");
    const double keep = 1.0 - opts.dropout_rate;
    k.dropout_scale.resize(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
      k.dropout_scale[j] = opts.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      c[j] *= k.dropout_scale[j];
    }
  }

  k.head = classifier_forward(m.head, c);
  r.probs = k.head.probs;
  return r;
}

inline ForwardResult forward(const FusionModel& m, const ModelInput& in,
                             const ForwardOptions& opts = {}) {
  return forward(m, in.numerical, in.categorical, in.text, opts, in.id);
}

/// Accumulates scale * d(cross-entropy)/d(params) into `grads`.
inline void backward(const FusionModel& m, const FusionCache& k, std::size_t label,
                     FusionGrads& grads, double scale = 1.0) {
  Tensor1D dc = classifier_backward_xent(m.head, k.head, label, grads.head, scale);
  if (!k.dropout_scale.empty()) {
    for (std::size_t j = 0; j < dc.size(); ++j) dc[j] *= k.dropout_scale[j];
  }
  std::size_t offset = 0;
  auto branch_back = [&](const MlpBranch& br, const std::array<DenseCache, 2>& caches,
                         std::array<DenseGrads, 2>& g) {
    const std::size_t w = br[1].out_dim();
    std::span<const double> d(dc.data() + offset, w);
    offset += w;
    Tensor1D d1 = dense_backward(br[1], caches[1], d, g[1]);
    dense_backward(br[0], caches[0], d1, g[0]);
  };
  if (m.mlp_num) branch_back(*m.mlp_num, k.num, *grads.mlp_num);
  if (m.mlp_cat) branch_back(*m.mlp_cat, k.cat, *grads.mlp_cat);
  if (m.encoder) {
    std::span<const double> da(dc.data() + offset, m.attention->dim());
    Tensor2D dH = attention_backward(*m.attention, k.attn, da, *grads.attention);
    bilstm_backward(*m.encoder, k.lstm, dH, *grads.encoder);
  }
}

// ---------------------------------------------------------------------------
// Top-k

struct Prediction {
  Tensor1D probs;
  std::vector<std::size_t> top_k;
};

/// Indices of the k largest probabilities, descending; equal probabilities
/// are ordered by lower class index first.
inline std::vector<std::size_t> top_k_indices(std::span<const double> probs, std::size_t k) {
  if (k < 1 || k > probs.size()) {
    throw ArgumentError("k must be in [1, " + std::to_string(probs.size()) + "], got " +
                        std::to_string(k));
  }
  std::vector<std::size_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

inline Prediction predict_topk(const FusionModel& m, const ModelInput& in, std::size_t k) {
  if (k < 1 || k > m.config.num_classes) {
    throw ArgumentError("k must be in [1, " + std::to_string(m.config.num_classes) +
                        "], got " + std::to_string(k));
  }
  auto r = forward(m, in);
  auto top = top_k_indices(r.probs, k);
  return {std::move(r.probs), std::move(top)};
}

// ---------------------------------------------------------------------------
// Checkpoint format
//
//   fusenet-model
//   format_version 1
//   variant <fusion|mlp|text>
//   <config key> <value>            (one line per ModelConfig field)
//   branch_order numerical,categorical,text
//   meta <key> <value>              (zero or more)
//   block <name> <rows> <cols>      (one per parameter block, in order)
//   end_header
//   <payload: every block's values as little-endian IEEE-754 binary64>

namespace detail {

inline void put_le_double(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffU));
    bits >>= 8;
  }
}

inline double get_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

inline bool single_line(std::string_view s) {
  return s.find('\n') == std::string_view::npos && s.find('\r') == std::string_view::npos;
}

}  // namespace detail

inline std::string serialize(const FusionModel& m) {
  m.validate();
  const ModelConfig& c = m.config;
  std::ostringstream h;
  h << "fusenet-model\n"
    << "format_version " << FusionModel::kFormatVersion << '\n'
    << "variant " << to_string(m.variant) << '\n'
    << "num_feature_dim " << c.num_feature_dim << '\n'
    << "cat_feature_dim " << c.cat_feature_dim << '\n'
    << "embed_dim " << c.embed_dim << '\n'
    << "lstm_hidden " << c.lstm_hidden << '\n'
    << "mlp_hidden " << c.mlp_hidden << '\n'
    << "num_classes " << c.num_classes << '\n'
    << "max_seq_len " << c.max_seq_len << '\n'
    << "mlp_activation " << to_string(c.mlp_activation) << '\n'
    << "seed " << c.seed << '\n'
    << "branch_order " << FusionModel::kBranchOrder << '\n';
  for (const auto& [key, value] : m.metadata) {
    if (key.empty() || key.find(' ') != std::string::npos || !detail::single_line(key) ||
        !detail::single_line(value)) {
      throw ArgumentError("metadata entry '" + key + "' must be a single line without spaces in the key");
    }
    h << "meta " << key << ' ' << value << '\n';
  }
  std::string payload;
  for_each_block(m, [&](const std::string& name, auto values, std::size_t rows, std::size_t cols) {
    h << "block " << name << ' ' << rows << ' ' << cols << '\n';
    for (double v : values) detail::put_le_double(payload, v);
  });
  h << "end_header\n";
  return h.str() + payload;
}

inline FusionModel deserialize(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&](std::string_view field) -> std::string_view {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw ModelFileError(std::string(field), "file truncated in header");
    auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto split_kv = [](std::string_view line) {
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos) return std::pair{line, std::string_view{}};
    return std::pair{line.substr(0, sp), line.substr(sp + 1)};
  };

  if (next_line("magic") != "fusenet-model") throw ModelFileError("magic", "not a fusenet model file");
  {
    auto [key, value] = split_kv(next_line("format_version"));
    int version = 0;
    if (key != "format_version" || !detail::parse_number(value, version)) {
      throw ModelFileError("format_version", "missing or malformed");
    }
    if (version != FusionModel::kFormatVersion) {
      throw ModelFileError("format_version", "unsupported version " + std::to_string(version) +
                                                 ", this build reads version " +
                                                 std::to_string(FusionModel::kFormatVersion));
    }
  }

  FusionModel shell;
  ModelConfig& c = shell.config;
  bool have_variant = false, have_order = false;
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> declared;
  for (;;) {
    auto line = next_line("header");
    if (line == "end_header") break;
    auto [key, value] = split_kv(line);
    auto as_size = [&](std::size_t& out) {
      if (!detail::parse_number(value, out)) {
        throw ModelFileError(std::string(key), "expected an unsigned integer, got '" + std::string(value) + "'");
      }
    };
    try {
      if (key == "variant") {
        shell.variant = variant_from_string(value);
        have_variant = true;
      } else if (key == "num_feature_dim") as_size(c.num_feature_dim);
      else if (key == "cat_feature_dim") as_size(c.cat_feature_dim);
      else if (key == "embed_dim") as_size(c.embed_dim);
      else if (key == "lstm_hidden") as_size(c.lstm_hidden);
      else if (key == "mlp_hidden") as_size(c.mlp_hidden);
      else if (key == "num_classes") as_size(c.num_classes);
      else if (key == "max_seq_len") as_size(c.max_seq_len);
      else if (key == "mlp_activation") c.mlp_activation = activation_from_string(value);
      else if (key == "seed") {
        if (!detail::parse_number(value, c.seed)) throw ModelFileError("seed", "malformed");
      } else if (key == "branch_order") {
        if (value != FusionModel::kBranchOrder) {
          throw ModelFileError("branch_order", "expected " + std::string(FusionModel::kBranchOrder) +
                                                   ", got " + std::string(value));
        }
        have_order = true;
      } else if (key == "meta") {
        auto [mk, mv] = split_kv(value);
        shell.metadata[std::string(mk)] = std::string(mv);
      } else if (key == "block") {
        std::istringstream in{std::string(value)};
        std::string name;
        std::size_t rows = 0, cols = 0;
        if (!(in >> name >> rows >> cols)) throw ModelFileError("block", "malformed declaration '" + std::string(value) + "'");
        declared.emplace_back(name, rows, cols);
      } else {
        throw ModelFileError(std::string(key), "unknown header field");
      }
    } catch (const ArgumentError& e) {
      throw ModelFileError(std::string(key), e.what());
    }
  }
  if (!have_variant) throw ModelFileError("variant", "missing");
  if (!have_order) throw ModelFileError("branch_order", "missing");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ModelFileError("config", e.what());
  }

  // Zero-initialised model of the declared architecture; the file must match
  // it block for block.
  Rng unused(0);
  FusionModel m = detail::build_variant(shell.variant, c, unused);
  m.metadata = std::move(shell.metadata);
  std::size_t i = 0;
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + pos;
  const std::size_t payload_len = bytes.size() - pos;
  std::size_t offset = 0;
  for_each_block(m, [&](const std::string& name, auto values, std::size_t rows, std::size_t cols) {
    if (i >= declared.size()) throw ModelFileError(name, "block not declared in header");
    const auto& [dname, drows, dcols] = declared[i++];
    if (dname != name) throw ModelFileError(name, "header declares '" + dname + "' at this position");
    if (drows != rows || dcols != cols) {
      throw ModelFileError(name, "declared shape " + shape_str(drows, dcols) + ", config implies " +
                                     shape_str(rows, cols));
    }
    if (offset + values.size() * 8 > payload_len) {
      throw ModelFileError(name, "payload truncated (corrupt length)");
    }
    for (double& v : values) {
      v = detail::get_le_double(payload + offset);
      offset += 8;
      if (!std::isfinite(v)) throw ModelFileError(name, "non-finite parameter");
    }
  });
  if (i != declared.size()) throw ModelFileError(std::get<0>(declared[i]), "unexpected extra block");
  if (offset != payload_len) {
    throw ModelFileError("payload", std::to_string(payload_len - offset) + " trailing bytes (corrupt length)");
  }
  m.validate();
  return m;
}

inline void save(const FusionModel& m, const std::string& path) {
  const std::string bytes = serialize(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

inline FusionModel load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace fusenet
