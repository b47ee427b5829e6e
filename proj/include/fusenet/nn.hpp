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

// Differentiable layers with hand-written backward passes.
//
// Conventions:
//  * Weight matrices are stored (input x output); a layer computes W^T x + b.
//  * Forward calls return the output together with a cache. Backward calls
//    take that cache and an upstream gradient, ACCUMULATE parameter gradients
//    into a caller-owned *Grads object, and return the input gradient.
//    Parameters are never mutated.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusenet/embed.hpp"
#include "fusenet/errors.hpp"
#include "fusenet/numcore.hpp"

namespace fusenet {

enum class Activation { identity, sigmoid, tanh, relu };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ArgumentError("unknown activation '" + std::string(s) + "'");
}

namespace detail {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::sigmoid: return sigmoid(z);
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y.
inline double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

inline void require_len(std::string_view what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": got " + shape_str(got) +
                     ", expected " + shape_str(want));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense

struct DenseLayer {
  Tensor2D W;
  Tensor1D b;
  Activation activation = Activation::identity;

  static DenseLayer zeros(std::size_t in, std::size_t out, Activation act) {
    return {Tensor2D(in, out), Tensor1D(out, 0.0), act};
  }
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation act,
                           Rng& rng) {
    DenseLayer l = zeros(in, out, act);
    glorot_uniform(l.W, rng);
    return l;
  }

  std::size_t in_dim() const noexcept { return W.rows(); }
  std::size_t out_dim() const noexcept { return W.cols(); }

  void validate(std::string_view name) const {
    if (W.rows() == 0 || W.cols() == 0 || b.size() != W.cols()) {
      throw ShapeError(std::string(name) + ": W " + W.shape() + ", b " +
                       shape_str(b.size()));
    }
  }
};

struct DenseGrads {
  Tensor2D W;
  Tensor1D b;

  DenseGrads() = default;
  explicit DenseGrads(const DenseLayer& l)
      : W(l.W.rows(), l.W.cols()), b(l.b.size(), 0.0) {}
};

struct DenseCache {
  Tensor1D x;
  Tensor1D z;
  Tensor1D y;
};

struct DenseOutput {
  Tensor1D y;
  DenseCache cache;
};

inline DenseOutput dense_forward(const DenseLayer& layer, std::span<const double> x) {
  detail::require_len("dense_forward input", x.size(), layer.in_dim());
  Tensor1D z = affine(layer.W, x, layer.b);
  Tensor1D y(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) y[j] = detail::activate(layer.activation, z[j]);
  return {y, DenseCache{Tensor1D(x.begin(), x.end()), std::move(z), y}};
}

inline Tensor1D dense_backward(const DenseLayer& layer, const DenseCache& cache,
                               std::span<const double> dy, DenseGrads& grads) {
  detail::require_len("dense_backward upstream", dy.size(), layer.out_dim());
  detail::require_len("dense_backward cache", cache.x.size(), layer.in_dim());
  Tensor1D dz(dy.size());
  for (std::size_t j = 0; j < dy.size(); ++j) {
    dz[j] = dy[j] * detail::activate_grad(layer.activation, cache.z[j], cache.y[j]);
  }
  add_outer(cache.x, dz, grads.W);
  axpy(1.0, dz, grads.b);
  return matvec(layer.W, dz);
}

// ---------------------------------------------------------------------------
// LSTM cell. Each gate has a single weight matrix acting on [h_prev, x_t].

struct LstmCell {
  Tensor2D W_i, W_f, W_o, W_q;
  Tensor1D b_i, b_f, b_o, b_q;

  static LstmCell zeros(std::size_t input_dim, std::size_t hidden_dim) {
    const std::size_t rows = input_dim + hidden_dim;
    LstmCell c;
    for (Tensor2D* W : {&c.W_i, &c.W_f, &c.W_o, &c.W_q}) *W = Tensor2D(rows, hidden_dim);
    for (Tensor1D* b : {&c.b_i, &c.b_f, &c.b_o, &c.b_q}) *b = Tensor1D(hidden_dim, 0.0);
    return c;
  }

  /// Glorot-uniform weights, zero biases except the forget gate at +1.
  static LstmCell glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    LstmCell c = zeros(input_dim, hidden_dim);
    for (Tensor2D* W : {&c.W_i, &c.W_f, &c.W_o, &c.W_q}) glorot_uniform(*W, rng);
    std::fill(c.b_f.begin(), c.b_f.end(), 1.0);
    return c;
  }

  std::size_t hidden_dim() const noexcept { return W_i.cols(); }
  std::size_t input_dim() const noexcept { return W_i.rows() - W_i.cols(); }

  void validate(std::string_view name) const {
    const std::size_t H = hidden_dim();
    if (H == 0 || W_i.rows() <= H) {
      throw ShapeError(std::string(name) + ": bad gate matrix " + W_i.shape());
    }
    for (const Tensor2D* W : {&W_f, &W_o, &W_q}) {
      if (W->rows() != W_i.rows() || W->cols() != H) {
        throw ShapeError(std::string(name) + ": gate shapes differ, " +
                         W_i.shape() + " vs " + W->shape());
      }
    }
    for (const Tensor1D* b : {&b_i, &b_f, &b_o, &b_q}) {
      if (b->size() != H) {
        throw ShapeError(std::string(name) + ": gate bias " + shape_str(b->size()) +
                         ", expected " + shape_str(H));
      }
    }
  }
};

struct LstmGrads {
  Tensor2D W_i, W_f, W_o, W_q;
  Tensor1D b_i, b_f, b_o, b_q;

  LstmGrads() = default;
  explicit LstmGrads(const LstmCell& c)
      : W_i(c.W_i.rows(), c.W_i.cols()), W_f(c.W_f.rows(), c.W_f.cols()),
        W_o(c.W_o.rows(), c.W_o.cols()), W_q(c.W_q.rows(), c.W_q.cols()),
        b_i(c.b_i.size(), 0.0), b_f(c.b_f.size(), 0.0),
        b_o(c.b_o.size(), 0.0), b_q(c.b_q.size(), 0.0) {}
};

struct LstmStepCache {
  Tensor1D z;  // [h_prev, x_t]
  Tensor1D i, f, o, q;
  Tensor1D c_prev;
  Tensor1D tanh_c;
};

struct LstmStepOutput {
  Tensor1D h;
  Tensor1D c;
  LstmStepCache cache;
};

inline LstmStepOutput lstm_step(const LstmCell& cell, std::span<const double> h_prev,
                                std::span<const double> c_prev,
                                std::span<const double> x_t) {
  const std::size_t H = cell.hidden_dim();
  detail::require_len("lstm_step h_prev", h_prev.size(), H);
  detail::require_len("lstm_step c_prev", c_prev.size(), H);
  detail::require_len("lstm_step x_t", x_t.size(), cell.input_dim());

  LstmStepCache k;
  k.z = concat({h_prev, x_t});
  k.i = sigmoid(affine(cell.W_i, k.z, cell.b_i));
  k.f = sigmoid(affine(cell.W_f, k.z, cell.b_f));
  k.o = sigmoid(affine(cell.W_o, k.z, cell.b_o));
  k.q = tanh_act(affine(cell.W_q, k.z, cell.b_q));
  k.c_prev.assign(c_prev.begin(), c_prev.end());

  Tensor1D c(H), h(H);
  k.tanh_c.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    c[j] = k.f[j] * c_prev[j] + k.i[j] * k.q[j];
    k.tanh_c[j] = std::tanh(c[j]);
    h[j] = k.o[j] * k.tanh_c[j];
  }
  return {std::move(h), std::move(c), std::move(k)};
}

struct LstmStepGrads {
  Tensor1D dh_prev;
  Tensor1D dc_prev;
  Tensor1D dx;
};

/// `dh` and `dc` are the total gradients arriving at h_t and c_t.
inline LstmStepGrads lstm_step_backward(const LstmCell& cell, const LstmStepCache& k,
                                        std::span<const double> dh,
                                        std::span<const double> dc, LstmGrads& grads) {
  const std::size_t H = cell.hidden_dim();
  detail::require_len("lstm_step_backward dh", dh.size(), H);
  detail::require_len("lstm_step_backward dc", dc.size(), H);
  detail::require_len("lstm_step_backward cache", k.z.size(), cell.W_i.rows());

  Tensor1D dzi(H), dzf(H), dzo(H), dzq(H);
  LstmStepGrads out{Tensor1D(H), Tensor1D(H), {}};
  for (std::size_t j = 0; j < H; ++j) {
    const double dct = dc[j] + dh[j] * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]);
    dzo[j] = dh[j] * k.tanh_c[j] * k.o[j] * (1.0 - k.o[j]);
    dzf[j] = dct * k.c_prev[j] * k.f[j] * (1.0 - k.f[j]);
    dzi[j] = dct * k.q[j] * k.i[j] * (1.0 - k.i[j]);
    dzq[j] = dct * k.i[j] * (1.0 - k.q[j] * k.q[j]);
    out.dc_prev[j] = dct * k.f[j];
  }

  add_outer(k.z, dzi, grads.W_i);
  add_outer(k.z, dzf, grads.W_f);
  add_outer(k.z, dzo, grads.W_o);
  add_outer(k.z, dzq, grads.W_q);
  axpy(1.0, dzi, grads.b_i);
  axpy(1.0, dzf, grads.b_f);
  axpy(1.0, dzo, grads.b_o);
  axpy(1.0, dzq, grads.b_q);

  Tensor1D dz(k.z.size());
  for (std::size_t r = 0; r < dz.size(); ++r) {
    dz[r] = dot(cell.W_i.row(r), dzi) + dot(cell.W_f.row(r), dzf) +
            dot(cell.W_o.row(r), dzo) + dot(cell.W_q.row(r), dzq);
  }
  out.dh_prev.assign(dz.begin(), dz.begin() + static_cast<std::ptrdiff_t>(H));
  out.dx.assign(dz.begin() + static_cast<std::ptrdiff_t>(H), dz.end());
  return out;
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM: row t of the output is [forward h_t, backward h_t],
// where the backward cell reads the sequence from the last position down.
// Padding positions are run through both recurrences like any other input.

struct BiLstmEncoder {
  LstmCell forward_cell;
  LstmCell backward_cell;

  static BiLstmEncoder glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    BiLstmEncoder e;
    e.forward_cell = LstmCell::glorot(input_dim, hidden_dim, rng);
    e.backward_cell = LstmCell::glorot(input_dim, hidden_dim, rng);
    return e;
  }

  std::size_t input_dim() const noexcept { return forward_cell.input_dim(); }
  std::size_t hidden_dim() const noexcept { return forward_cell.hidden_dim(); }
  std::size_t output_dim() const noexcept { return 2 * hidden_dim(); }

  void validate(std::string_view name) const {
    forward_cell.validate(std::string(name) + ".forward");
    backward_cell.validate(std::string(name) + ".backward");
    if (forward_cell.W_i.rows() != backward_cell.W_i.rows() ||
        forward_cell.hidden_dim() != backward_cell.hidden_dim()) {
      throw ShapeError(std::string(name) + ": forward and backward cells differ, " +
                       forward_cell.W_i.shape() + " vs " + backward_cell.W_i.shape());
    }
  }
};

struct BiLstmGrads {
  LstmGrads forward_cell;
  LstmGrads backward_cell;

  BiLstmGrads() = default;
  explicit BiLstmGrads(const BiLstmEncoder& e)
      : forward_cell(e.forward_cell), backward_cell(e.backward_cell) {}
};

struct BiLstmCache {
  std::vector<LstmStepCache> fwd;  // indexed by position
  std::vector<LstmStepCache> bwd;  // indexed by position
};

struct BiLstmOutput {
  Tensor2D H;
  BiLstmCache cache;
};

inline BiLstmOutput bilstm_forward(const BiLstmEncoder& enc, const Tensor2D& X) {
  if (X.cols() != enc.input_dim()) {
    throw ShapeError("bilstm_forward: input " + X.shape() + " for input_dim " +
                     std::to_string(enc.input_dim()));
  }
  const std::size_t T = X.rows(), Hd = enc.hidden_dim();
  BiLstmOutput out{Tensor2D(T, 2 * Hd), {}};
  out.cache.fwd.resize(T);
  out.cache.bwd.resize(T);

  Tensor1D h(Hd, 0.0), c(Hd, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    auto step = lstm_step(enc.forward_cell, h, c, X.row(t));
    std::copy(step.h.begin(), step.h.end(), out.H.row(t).begin());
    h = std::move(step.h);
    c = std::move(step.c);
    out.cache.fwd[t] = std::move(step.cache);
  }
  std::fill(h.begin(), h.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t t = T; t-- > 0;) {
    auto step = lstm_step(enc.backward_cell, h, c, X.row(t));
    std::copy(step.h.begin(), step.h.end(), out.H.row(t).begin() + static_cast<std::ptrdiff_t>(Hd));
    h = std::move(step.h);
    c = std::move(step.c);
    out.cache.bwd[t] = std::move(step.cache);
  }
  return out;
}

inline BiLstmOutput bilstm_forward(const BiLstmEncoder& enc, const EmbeddedSequence& seq) {
  return bilstm_forward(enc, seq.vectors);
}

/// Backpropagation through time in both directions; returns dL/dX.
inline Tensor2D bilstm_backward(const BiLstmEncoder& enc, const BiLstmCache& cache,
                                const Tensor2D& dH, BiLstmGrads& grads) {
  const std::size_t T = cache.fwd.size(), Hd = enc.hidden_dim();
  if (dH.rows() != T || dH.cols() != 2 * Hd || cache.bwd.size() != T) {
    throw ShapeError("bilstm_backward: upstream " + dH.shape() + " for cache of " +
                     std::to_string(T) + " steps, hidden " + std::to_string(Hd));
  }
  Tensor2D dX(T, enc.input_dim());
  Tensor1D dh_next(Hd, 0.0), dc_next(Hd, 0.0), dh(Hd);

  for (std::size_t t = T; t-- > 0;) {
    const auto up = dH.row(t);
    for (std::size_t j = 0; j < Hd; ++j) dh[j] = up[j] + dh_next[j];
    auto g = lstm_step_backward(enc.forward_cell, cache.fwd[t], dh, dc_next,
                                grads.forward_cell);
    axpy(1.0, g.dx, dX.row(t));
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }

  std::fill(dh_next.begin(), dh_next.end(), 0.0);
  std::fill(dc_next.begin(), dc_next.end(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto up = dH.row(t);
    for (std::size_t j = 0; j < Hd; ++j) dh[j] = up[Hd + j] + dh_next[j];
    auto g = lstm_step_backward(enc.backward_cell, cache.bwd[t], dh, dc_next,
                                grads.backward_cell);
    axpy(1.0, g.dx, dX.row(t));
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
  return dX;
}

// ---------------------------------------------------------------------------
// Feedforward attention: psi_t = tanh(w . h_t + b), alpha = softmax(psi) over
// unmasked positions, a = sum_t alpha_t h_t. Masked positions get alpha == 0.

struct FeedforwardAttention {
  Tensor1D w;
  double b = 0.0;

  static FeedforwardAttention zeros(std::size_t dim) { return {Tensor1D(dim, 0.0), 0.0}; }
  static FeedforwardAttention glorot(std::size_t dim, Rng& rng) {
    Tensor2D w(dim, 1);
    glorot_uniform(w, rng);
    return {Tensor1D(w.values().begin(), w.values().end()), 0.0};
  }

  std::size_t dim() const noexcept { return w.size(); }

  void validate(std::string_view name) const {
    if (w.empty()) throw ShapeError(std::string(name) + ": empty attention vector");
  }
};

struct AttentionGrads {
  Tensor1D w;
  double b = 0.0;

  AttentionGrads() = default;
  explicit AttentionGrads(const FeedforwardAttention& a) : w(a.w.size(), 0.0) {}
};

struct AttentionCache {
  Tensor2D H;
  std::vector<std::uint8_t> mask;
  Tensor1D psi;
  Tensor1D alpha;
};

struct AttentionOutput {
  Tensor1D a;
  Tensor1D alphas;
  AttentionCache cache;
};

inline AttentionOutput attention_forward(const FeedforwardAttention& attn, const Tensor2D& H,
                                         std::span<const std::uint8_t> mask) {
  if (H.cols() != attn.dim() || mask.size() != H.rows()) {
    throw ShapeError("attention_forward: H " + H.shape() + ", w " + shape_str(attn.dim()) +
                     ", mask " + shape_str(mask.size()));
  }
  const std::size_t T = H.rows();
  Tensor1D psi(T, 0.0), alpha(T, 0.0);
  double max_psi = -2.0;  // psi lies in (-1, 1)
  bool any = false;
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    psi[t] = std::tanh(dot(attn.w, H.row(t)) + attn.b);
    max_psi = std::max(max_psi, psi[t]);
    any = true;
  }
  if (!any) throw NoAttendablePositions("attention: every position is masked");

  double sum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    alpha[t] = std::exp(psi[t] - max_psi);
    sum += alpha[t];
  }
  Tensor1D a(H.cols(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    alpha[t] /= sum;
    axpy(alpha[t], H.row(t), a);
  }
  return {a, alpha,
          AttentionCache{H, std::vector<std::uint8_t>(mask.begin(), mask.end()), psi, alpha}};
}

/// Returns dL/dH; masked rows receive zero gradient.
inline Tensor2D attention_backward(const FeedforwardAttention& attn, const AttentionCache& k,
                                   std::span<const double> da, AttentionGrads& grads) {
  detail::require_len("attention_backward upstream", da.size(), attn.dim());
  if (k.H.cols() != attn.dim()) {
    throw ShapeError("attention_backward: cache H " + k.H.shape() + " for w " +
                     shape_str(attn.dim()));
  }
  const std::size_t T = k.H.rows();
  Tensor1D dalpha(T, 0.0);
  double weighted = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!k.mask[t]) continue;
    dalpha[t] = dot(da, k.H.row(t));
    weighted += k.alpha[t] * dalpha[t];
  }
  Tensor2D dH(T, attn.dim());
  for (std::size_t t = 0; t < T; ++t) {
    if (!k.mask[t]) continue;
    const double dpsi = k.alpha[t] * (dalpha[t] - weighted);
    const double ds = dpsi * (1.0 - k.psi[t] * k.psi[t]);
    axpy(ds, k.H.row(t), grads.w);
    grads.b += ds;
    auto row = dH.row(t);
    axpy(k.alpha[t], da, row);
    axpy(ds, attn.w, row);
  }
  return dH;
}

// ---------------------------------------------------------------------------
// Softmax classification head: a dense layer with identity activation
// followed by softmax.

struct ClassifierOutput {
  Tensor1D probs;
  DenseCache cache;  // cache.y holds the logits
};

inline ClassifierOutput classifier_forward(const DenseLayer& head, std::span<const double> c) {
  if (head.activation != Activation::identity) {
    throw ArgumentError("classifier head must use the identity activation");
  }
  auto out = dense_forward(head, c);
  return {softmax(out.y), std::move(out.cache)};
}

/// Gradient for an arbitrary upstream gradient on the probabilities.
inline Tensor1D classifier_backward(const DenseLayer& head, const ClassifierOutput& fwd,
                                    std::span<const double> dprobs, DenseGrads& grads) {
  detail::require_len("classifier_backward upstream", dprobs.size(), fwd.probs.size());
  const double inner = dot(fwd.probs, dprobs);
  Tensor1D dlogits(dprobs.size());
  for (std::size_t j = 0; j < dlogits.size(); ++j) {
    dlogits[j] = fwd.probs[j] * (dprobs[j] - inner);
  }
  return dense_backward(head, fwd.cache, dlogits, grads);
}

/// Cross-entropy specialisation: dL/dlogits == probs - onehot(label).
inline Tensor1D classifier_backward_xent(const DenseLayer& head, const ClassifierOutput& fwd,
                                         std::size_t label, DenseGrads& grads,
                                         double scale = 1.0) {
  if (label >= fwd.probs.size()) {
    throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(fwd.probs.size()) + " classes");
  }
  Tensor1D dlogits = fwd.probs;
  dlogits[label] -= 1.0;
  for (double& v : dlogits) v *= scale;
  return dense_backward(head, fwd.cache, dlogits, grads);
}

}  // namespace fusenet
