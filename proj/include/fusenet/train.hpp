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

// Mini-batch cross-entropy training and the finite-difference gradient
// checker.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fusenet/data.hpp"
#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/fusion.hpp"
#include "fusenet/nn.hpp"
#include "fusenet/numcore.hpp"
#include "fusenet/parallel.hpp"

namespace fusenet {

inline constexpr double kProbabilityFloor = 1e-12;

/// -ln(probs[label]), with probs[label] floored at 1e-12.
inline double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

enum class OptimizerKind { sgd, adam };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ArgumentError("unknown optimizer '" + std::string(s) + "'");
}

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  /// Zero is accepted and leaves the parameters untouched.
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Inverted dropout on the branch outputs, training only.
  double dropout_rate = 0.0;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t early_stop_patience = 5;
  double clip_norm = 5.0;
  /// Optional per-class loss weights; empty means all ones.
  std::vector<double> class_weights;
  std::uint64_t seed = 1;
  std::size_t threads = default_thread_count();

  void validate(std::size_t num_classes) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be finite and >= 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw ConfigError("adam hyperparameters out of range");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
    if (!class_weights.empty()) {
      if (class_weights.size() != num_classes) {
        throw ConfigError("class_weights has " + std::to_string(class_weights.size()) + " entries for " +
                          std::to_string(num_classes) + " classes");
      }
      for (double w : class_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be finite and >= 0");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Optimizer

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const FusionModel& model) : cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::adam) {
      for_each_block(model, [&](const std::string&, auto values, std::size_t, std::size_t) {
        m_.emplace_back(values.size(), 0.0);
        v_.emplace_back(values.size(), 0.0);
      });
    }
  }

  void step(FusionModel& model, const FusionGrads& grads) {
    std::vector<std::span<const double>> g;
    for_each_block(grads, [&](const std::string&, auto values, std::size_t, std::size_t) { g.emplace_back(values); });
    ++t_;
    const double lr = cfg_.learning_rate;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t b = 0;
    for_each_block(model, [&](const std::string&, auto values, std::size_t, std::size_t) {
      const auto gb = g[b];
      if (cfg_.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * gb[i];
      } else {
        auto& m = m_[b];
        auto& v = v_[b];
        for (std::size_t i = 0; i < values.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gb[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gb[i] * gb[i];
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          values[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
      }
      ++b;
    });
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<Tensor1D> m_, v_;
  std::size_t t_ = 0;
};

/// Scales all gradient blocks so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_global_norm(FusionGrads& grads, double max_norm) {
  double sq = 0.0;
  for_each_block(grads, [&](const std::string&, auto values, std::size_t, std::size_t) {
    for (double v : values) sq += v * v;
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for_each_block(grads, [&](const std::string&, auto values, std::size_t, std::size_t) {
      for (double& v : values) v *= s;
    });
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_top3 = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;

  const EpochRecord& best() const { return epochs.at(best_epoch - 1); }

  /// Equality ignoring wall time.
  bool same_trajectory(const TrainReport& o) const {
    if (best_epoch != o.best_epoch || stopped_early != o.stopped_early || epochs.size() != o.epochs.size()) {
      return false;
    }
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto& a = epochs[i];
      const auto& b = o.epochs[i];
      if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_top3 != b.val_top3 ||
          a.val_loss != b.val_loss) {
        return false;
      }
    }
    return true;
  }

  std::string to_tsv() const {
    std::string out = "epoch\ttrain_loss\tval_top3\tval_loss\tseconds\n";
    for (const auto& e : epochs) {
      out += std::to_string(e.epoch) + '\t' + detail::format_double(e.train_loss) + '\t' +
             detail::format_double(e.val_top3) + '\t' + detail::format_double(e.val_loss) + '\t' +
             detail::format_double(e.seconds) + '\n';
    }
    out += "# best_epoch " + std::to_string(best_epoch) + '\n';
    return out;
  }

  void write_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write training report " + path);
    out << to_tsv();
    if (!out) throw Error("write failed for " + path);
  }
};

struct TrainResult {
  FusionModel model;
  TrainReport report;
};

struct Evaluation {
  double top3 = 0.0;
  double loss = 0.0;
};

/// Mean cross-entropy and top-min(3, K) accuracy, no dropout.
inline Evaluation evaluate_loss(const FusionModel& model, std::span<const LabeledInput> data,
                                std::size_t threads) {
  if (data.empty()) throw ArgumentError("evaluation set is empty");
  const std::size_t k = std::min<std::size_t>(3, model.config.num_classes);
  std::vector<double> loss(data.size());
  std::vector<std::uint8_t> hit(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto r = forward(model, data[i].input);
    loss[i] = cross_entropy(r.probs, data[i].label);
    const auto top = top_k_indices(r.probs, k);
    hit[i] = std::find(top.begin(), top.end(), data[i].label) != top.end();
  });
  Evaluation e;
  for (std::size_t i = 0; i < data.size(); ++i) {
    e.loss += loss[i];
    e.top3 += hit[i];
  }
  e.loss /= static_cast<double>(data.size());
  e.top3 /= static_cast<double>(data.size());
  return e;
}

namespace detail {

inline void check_input_dims(const FusionModel& m, const LabeledInput& x, std::string_view set) {
  auto fail = [&](const std::string& what) {
    throw ShapeError(std::string(set) + " example " + x.input.id + ": " + what);
  };
  if (x.label >= m.config.num_classes) fail("label out of range");
  if (uses_tabular(m.variant)) {
    if (x.input.numerical.size() != m.config.num_feature_dim) {
      fail("numerical features " + shape_str(x.input.numerical.size()) + ", model expects " +
           shape_str(m.config.num_feature_dim));
    }
    if (x.input.categorical.size() != m.config.cat_feature_dim) {
      fail("categorical features " + shape_str(x.input.categorical.size()) + ", model expects " +
           shape_str(m.config.cat_feature_dim));
    }
  }
  if (uses_text(m.variant) && x.input.text.vectors.cols() != m.config.embed_dim) {
    fail("text embeddings " + x.input.text.vectors.shape() + ", model expects width " +
         std::to_string(m.config.embed_dim));
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains a copy of `model` and returns the checkpoint with the best
/// validation top-3 accuracy (ties broken by lower validation loss).
/// Results depend only on the seed, never on the thread count.
inline TrainResult train(FusionModel model, std::span<const LabeledInput> train_set,
                         std::span<const LabeledInput> val_set, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  model.validate();
  cfg.validate(model.config.num_classes);
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (val_set.empty()) throw ArgumentError("validation set is empty");
  for (const auto& x : train_set) detail::check_input_dims(model, x, "train");
  for (const auto& x : val_set) detail::check_input_dims(model, x, "validation");

  Optimizer opt(cfg, model);
  Rng shuffle_rng(Rng::derive(cfg.seed, 0x5eed));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t slots = std::min(cfg.batch_size, train_set.size());
  std::vector<FusionGrads> per_example(slots, FusionGrads(model));
  std::vector<double> losses(slots);
  FusionGrads total(model);

  TrainResult best{model, {}};
  TrainReport& report = best.report;
  std::optional<Evaluation> best_eval;
  std::size_t since_best = 0;
  std::size_t batch_counter = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      ++batch_counter;
      parallel_for(n, cfg.threads, [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        const auto& x = train_set[idx];
        FusionGrads& g = per_example[j];
        fill_blocks(g, 0.0);
        std::optional<Rng> drop_rng;
        ForwardOptions fo;
        if (cfg.dropout_rate > 0.0) {
          drop_rng.emplace(Rng::derive(cfg.seed, epoch, idx + 1));
          fo.dropout_rate = cfg.dropout_rate;
          fo.rng = &*drop_rng;
        }
        auto r = forward(model, x.input, fo);
        const double w = cfg.class_weights.empty() ? 1.0 : cfg.class_weights[x.label];
        losses[j] = w * cross_entropy(r.probs, x.label);
        backward(model, r.cache, x.label, g, w / static_cast<double>(n));
      });

      fill_blocks(total, 0.0);
      std::vector<std::span<double>> dst;
      for_each_block(total, [&](const std::string&, auto values, std::size_t, std::size_t) { dst.push_back(values); });
      std::string bad_example;
      for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(losses[j]) && bad_example.empty()) bad_example = train_set[order[start + j]].input.id;
        epoch_loss += losses[j];
        std::size_t b = 0;
        for_each_block(per_example[j], [&](const std::string&, auto values, std::size_t, std::size_t) {
          auto d = dst[b++];
          for (std::size_t i = 0; i < values.size(); ++i) d[i] += values[i];
        });
      }
      std::string bad_block;
      for_each_block(total, [&](const std::string& name, auto values, std::size_t, std::size_t) {
        if (bad_block.empty() && !all_finite(values)) bad_block = name;
      });
      if (!bad_example.empty() || !bad_block.empty()) {
        std::string msg = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_counter) + ":";
        if (!bad_example.empty()) {
          msg += " non-finite loss on example " + bad_example + ";";
        } else {
          // Finite loss but a non-finite gradient: find the example that produced it.
          for (std::size_t j = 0; j < n && bad_example.empty(); ++j) {
            for_each_block(per_example[j], [&](const std::string&, auto values, std::size_t, std::size_t) {
              if (bad_example.empty() && !all_finite(values)) bad_example = train_set[order[start + j]].input.id;
            });
          }
          if (!bad_example.empty()) msg += " non-finite gradient from example " + bad_example + ";";
        }
        msg += bad_block.empty() ? " gradients finite" : " non-finite gradient in parameter block " + bad_block;
        throw TrainingError(msg);
      }
      clip_global_norm(total, cfg.clip_norm);
      opt.step(model, total);
    }

    const Evaluation ev = evaluate_loss(model, val_set, cfg.threads);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.val_top3 = ev.top3;
    rec.val_loss = ev.loss;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool improved = !best_eval || ev.top3 > best_eval->top3 ||
                          (ev.top3 == best_eval->top3 && ev.loss < best_eval->loss);
    if (improved) {
      best_eval = ev;
      best.model = model;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      report.stopped_early = true;
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Gradient checking

inline constexpr double kFiniteDifferenceStep = 1e-5;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

struct BlockCheck {
  std::string name;
  std::size_t count = 0;
  double max_rel_err = 0.0;
};

struct GradCheckResult {
  std::vector<BlockCheck> blocks;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_rel_err);
    return m;
  }
};

/// A parameter (or input) block and its analytic gradient.
struct GradBlock {
  std::string name;
  std::span<double> values;
  std::span<const double> grad;
};

/// L(z) - L(z0) for the cross-entropy of logits z, computed without forming
/// either loss. Central differences of this equal those of the loss itself,
/// but round-off stays at the scale of the perturbation instead of the loss.
inline double cross_entropy_delta(std::span<const double> z, std::span<const double> z0, std::size_t label) {
  if (z.size() != z0.size() || label >= z.size()) throw ArgumentError("cross_entropy_delta: bad shapes");
  const double m = *std::max_element(z0.begin(), z0.end());
  double s0 = 0.0, num = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double e = std::exp(z0[j] - m);
    s0 += e;
    num += e * std::expm1(z[j] - z0[j]);
  }
  return std::log1p(num / s0) - (z[label] - z0[label]);
}

/// Sum of r_i * (y_i - y0_i).
inline double projected_delta(std::span<const double> r, std::span<const double> y, std::span<const double> y0) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * (y[i] - y0[i]);
  return s;
}

/// Compares each analytic gradient entry against a central difference of
/// `loss`, perturbing `values` in place and restoring it afterwards.
template <class Loss>
GradCheckResult check_blocks(const std::vector<GradBlock>& blocks, Loss&& loss,
                             double step = kFiniteDifferenceStep) {
  GradCheckResult out;
  for (const auto& b : blocks) {
    if (b.values.size() != b.grad.size()) throw ShapeError("gradient block " + b.name + " size mismatch");
    BlockCheck bc{b.name, b.values.size(), 0.0};
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      const double saved = b.values[i];
      b.values[i] = saved + step;
      const double up = loss();
      b.values[i] = saved - step;
      const double down = loss();
      b.values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      bc.max_rel_err = std::max(bc.max_rel_err, relative_error(b.grad[i], numeric));
    }
    out.blocks.push_back(std::move(bc));
  }
  return out;
}

namespace detail {

inline void randomize(std::span<double> xs, Rng& rng, double scale = 1.0) {
  for (double& v : xs) v = rng.uniform(-scale, scale);
}

inline Tensor1D random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Tensor1D v(n);
  randomize(v, rng, scale);
  return v;
}

inline Tensor2D random_mat(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2D m(r, c);
  randomize(m.values(), rng, scale);
  return m;
}

inline void randomize_cell(LstmCell& c, Rng& rng) {
  for (auto* W : {&c.W_i, &c.W_f, &c.W_o, &c.W_q}) randomize(W->values(), rng, 0.6);
  for (auto* b : {&c.b_i, &c.b_f, &c.b_o, &c.b_q}) randomize(*b, rng, 0.5);
}

template <class T>
void push_block(std::vector<GradBlock>& out, const std::string& name, T& values, const T& grad) {
  if constexpr (std::is_same_v<T, Tensor2D>) {
    out.push_back({name, values.values(), grad.values()});
  } else {
    out.push_back({name, std::span<double>(values), std::span<const double>(grad)});
  }
}

inline void push_cell(std::vector<GradBlock>& out, const std::string& p, LstmCell& c, const LstmGrads& g) {
  push_block(out, p + ".W_i", c.W_i, g.W_i);
  push_block(out, p + ".W_f", c.W_f, g.W_f);
  push_block(out, p + ".W_o", c.W_o, g.W_o);
  push_block(out, p + ".W_q", c.W_q, g.W_q);
  push_block(out, p + ".b_i", c.b_i, g.b_i);
  push_block(out, p + ".b_f", c.b_f, g.b_f);
  push_block(out, p + ".b_o", c.b_o, g.b_o);
  push_block(out, p + ".b_q", c.b_q, g.b_q);
}

}  // namespace detail

enum class LayerKind { dense, lstm_step, bilstm, attention, classifier };

inline constexpr std::array<LayerKind, 5> kAllLayerKinds = {LayerKind::dense, LayerKind::lstm_step,
                                                            LayerKind::bilstm, LayerKind::attention,
                                                            LayerKind::classifier};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::lstm_step: return "lstm_step";
    case LayerKind::bilstm: return "bilstm";
    case LayerKind::attention: return "attention";
    case LayerKind::classifier: return "classifier";
  }
  return "dense";
}

/// Checks one layer in isolation under the loss L = r . output for a fixed
/// random r, covering parameter and input gradients. Block names are
/// prefixed with the layer name.
inline GradCheckResult grad_check_layer(LayerKind kind, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x9c, static_cast<std::uint64_t>(kind)));
  const std::string p(to_string(kind));
  std::vector<GradBlock> blocks;

  switch (kind) {
    case LayerKind::dense: {
      // tanh here; relu and sigmoid are covered by the end-to-end checks.
      DenseLayer layer{detail::random_mat(5, 4, rng), detail::random_vec(4, rng, 0.5), Activation::tanh};
      Tensor1D x = detail::random_vec(5, rng);
      const Tensor1D r = detail::random_vec(4, rng);
      DenseGrads g(layer);
      const auto fwd = dense_forward(layer, x);
      const Tensor1D dx = dense_backward(layer, fwd.cache, r, g);
      detail::push_block(blocks, p + ".W", layer.W, g.W);
      detail::push_block(blocks, p + ".b", layer.b, g.b);
      detail::push_block(blocks, p + ".x", x, dx);
      return check_blocks(blocks, [&] { return projected_delta(r, dense_forward(layer, x).y, fwd.y); });
    }
    case LayerKind::lstm_step: {
      const std::size_t in = 4, H = 3;
      LstmCell cell = LstmCell::zeros(in, H);
      detail::randomize_cell(cell, rng);
      Tensor1D h = detail::random_vec(H, rng), c = detail::random_vec(H, rng), x = detail::random_vec(in, rng);
      const Tensor1D rh = detail::random_vec(H, rng), rc = detail::random_vec(H, rng);
      LstmGrads g(cell);
      const auto fwd = lstm_step(cell, h, c, x);
      const auto d = lstm_step_backward(cell, fwd.cache, rh, rc, g);
      detail::push_cell(blocks, p, cell, g);
      detail::push_block(blocks, p + ".h_prev", h, d.dh_prev);
      detail::push_block(blocks, p + ".c_prev", c, d.dc_prev);
      detail::push_block(blocks, p + ".x", x, d.dx);
      return check_blocks(blocks, [&] {
        const auto o = lstm_step(cell, h, c, x);
        return projected_delta(rh, o.h, fwd.h) + projected_delta(rc, o.c, fwd.c);
      });
    }
    case LayerKind::bilstm: {
      const std::size_t in = 4, H = 3, T = 3;
      BiLstmEncoder enc{LstmCell::zeros(in, H), LstmCell::zeros(in, H)};
      detail::randomize_cell(enc.forward_cell, rng);
      detail::randomize_cell(enc.backward_cell, rng);
      Tensor2D X = detail::random_mat(T, in, rng);
      const Tensor2D R = detail::random_mat(T, 2 * H, rng);
      BiLstmGrads g(enc);
      const auto fwd = bilstm_forward(enc, X);
      const Tensor2D dX = bilstm_backward(enc, fwd.cache, R, g);
      detail::push_cell(blocks, p + ".forward", enc.forward_cell, g.forward_cell);
      detail::push_cell(blocks, p + ".backward", enc.backward_cell, g.backward_cell);
      detail::push_block(blocks, p + ".X", X, dX);
      return check_blocks(blocks, [&] {
        return projected_delta(R.values(), bilstm_forward(enc, X).H.values(), fwd.H.values());
      });
    }
    case LayerKind::attention: {
      const std::size_t D = 4, T = 5;
      FeedforwardAttention attn{detail::random_vec(D, rng), rng.uniform(-0.5, 0.5)};
      Tensor2D H = detail::random_mat(T, D, rng);
      const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1};
      const Tensor1D r = detail::random_vec(D, rng);
      AttentionGrads g(attn);
      const auto fwd = attention_forward(attn, H, mask);
      const Tensor2D dH = attention_backward(attn, fwd.cache, r, g);
      detail::push_block(blocks, p + ".w", attn.w, g.w);
      blocks.push_back({p + ".b", std::span(&attn.b, 1), std::span<const double>(&g.b, 1)});
      detail::push_block(blocks, p + ".H", H, dH);
      return check_blocks(blocks, [&] { return projected_delta(r, attention_forward(attn, H, mask).a, fwd.a); });
    }
    case LayerKind::classifier: {
      const std::size_t in = 6, K = 5;
      DenseLayer head{detail::random_mat(in, K, rng), detail::random_vec(K, rng, 0.5), Activation::identity};
      Tensor1D c = detail::random_vec(in, rng);
      const Tensor1D r = detail::random_vec(K, rng);
      DenseGrads g(head);
      const auto fwd = classifier_forward(head, c);
      const Tensor1D dc = classifier_backward(head, fwd, r, g);
      detail::push_block(blocks, p + ".W", head.W, g.W);
      detail::push_block(blocks, p + ".b", head.b, g.b);
      detail::push_block(blocks, p + ".c", c, dc);
      return check_blocks(blocks, [&] { return projected_delta(r, classifier_forward(head, c).probs, fwd.probs); });
    }
  }
  throw ArgumentError("unknown layer kind");
}

/// Small random model of the given variant for gradient checking: every
/// dimension <= 8, T = 5 with the last position padded and one OOV (zero)
/// row.
struct GradCheckCase {
  FusionModel model;
  ModelInput input;
  std::size_t label = 0;
};

inline GradCheckCase make_grad_check_case(Variant variant, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x6c, static_cast<std::uint64_t>(variant)));
  ModelConfig cfg;
  cfg.num_feature_dim = 4;
  cfg.cat_feature_dim = 3;
  cfg.embed_dim = 5;
  cfg.lstm_hidden = 3;
  cfg.mlp_hidden = 4;
  cfg.num_classes = 5;
  cfg.max_seq_len = 5;
  cfg.mlp_activation = seed % 2 == 0 ? Activation::relu : Activation::tanh;
  cfg.seed = seed;
  GradCheckCase gc{build(variant, cfg, rng), {}, 0};
  // Larger than Glorot scale with nonzero biases. Recurrent weights get unit
  // scale: their gradients are otherwise small enough that central-difference
  // round-off (about 1e-11) shows up in the relative error.
  for_each_block(gc.model, [&](const std::string& name, auto values, std::size_t, std::size_t) {
    detail::randomize(values, rng, name.starts_with("encoder.") ? 1.0 : 0.8);
  });
  gc.input.id = "gradcheck-" + std::to_string(seed);
  gc.input.numerical = detail::random_vec(cfg.num_feature_dim, rng, 1.5);
  gc.input.categorical.assign(cfg.cat_feature_dim, 0.0);
  gc.input.categorical[rng.uniform_int(cfg.cat_feature_dim)] = 1.0;
  gc.input.text.vectors = detail::random_mat(cfg.max_seq_len, cfg.embed_dim, rng);
  gc.input.text.mask.assign(cfg.max_seq_len, 1);
  gc.input.text.mask[cfg.max_seq_len - 1] = 0;
  for (double& v : gc.input.text.vectors.row(cfg.max_seq_len - 1)) v = 0.0;
  for (double& v : gc.input.text.vectors.row(1)) v = 0.0;  // OOV token
  gc.input.text.oov_count = 1;
  gc.label = rng.uniform_int(cfg.num_classes);
  return gc;
}

/// Analytic vs finite-difference gradient of the full cross-entropy loss for
/// every parameter of a small random model.
inline GradCheckResult grad_check(Variant variant, std::uint64_t seed) {
  GradCheckCase gc = make_grad_check_case(variant, seed);
  FusionGrads grads(gc.model);
  const auto fwd = forward(gc.model, gc.input);
  backward(gc.model, fwd.cache, gc.label, grads);

  std::vector<std::span<const double>> g;
  for_each_block(grads, [&](const std::string&, auto values, std::size_t, std::size_t) { g.emplace_back(values); });
  std::vector<GradBlock> blocks;
  std::size_t b = 0;
  for_each_block(gc.model, [&](const std::string& name, auto values, std::size_t, std::size_t) {
    blocks.push_back({name, values, g[b++]});
  });
  const Tensor1D z0 = fwd.cache.head.cache.y;
  return check_blocks(blocks, [&] {
    return cross_entropy_delta(forward(gc.model, gc.input).cache.head.cache.y, z0, gc.label);
  });
}

}  // namespace fusenet
