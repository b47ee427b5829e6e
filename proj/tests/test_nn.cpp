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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "fusenet/nn.hpp"
#include "fusenet/train.hpp"

namespace fusenet {
namespace {

constexpr double kStep = 1e-5;

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

/// Central-difference check of `grad` against `loss` over every entry of
/// `values`; returns the max relative error.
double fd_max_err(std::span<double> values, std::span<const double> grad, const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + kStep;
    const double up = loss();
    values[i] = saved - kStep;
    const double down = loss();
    values[i] = saved;
    worst = std::max(worst, rel_err(grad[i], (up - down) / (2 * kStep)));
  }
  return worst;
}

void fill_random(std::span<double> xs, Rng& rng, double scale = 1.0) {
  for (double& v : xs) v = rng.uniform(-scale, scale);
}

Tensor1D rvec(std::size_t n, Rng& rng, double scale = 1.0) {
  Tensor1D v(n);
  fill_random(v, rng, scale);
  return v;
}

// ---------------------------------------------------------------------------
// Dense

TEST(Dense, IdentityLayer) {
  DenseLayer l{Tensor2D::identity(2), Tensor1D{0, 0}, Activation::identity};
  EXPECT_EQ(dense_forward(l, Tensor1D{1, 2}).y, (Tensor1D{1, 2}));
}

TEST(Dense, ZeroSigmoidLayerIsHalf) {
  const auto l = DenseLayer::zeros(4, 3, Activation::sigmoid);
  for (double v : dense_forward(l, Tensor1D{9, -2, 3, 1e6}).y) EXPECT_EQ(v, 0.5);
}

TEST(Dense, WrongInputLengthIsShapeError) {
  const auto l = DenseLayer::zeros(4, 3, Activation::relu);
  EXPECT_THROW(dense_forward(l, Tensor1D{1, 2}), ShapeError);
}

TEST(Dense, JacobianVectorProductMatchesFiniteDifferences) {
  Rng rng(7);
  auto l = DenseLayer::glorot(6, 4, Activation::tanh, rng);
  fill_random(l.b, rng);
  Tensor1D x = rvec(6, rng);
  const Tensor1D v = rvec(6, rng);

  // Row j of the Jacobian is the input gradient for upstream e_j.
  const auto fwd = dense_forward(l, x);
  Tensor1D jv(4, 0.0);
  for (std::size_t j = 0; j < 4; ++j) {
    Tensor1D e(4, 0.0);
    e[j] = 1.0;
    DenseGrads g(l);
    jv[j] = dot(dense_backward(l, fwd.cache, e, g), v);
  }
  Tensor1D xp = x, xm = x;
  for (std::size_t i = 0; i < 6; ++i) {
    xp[i] += kStep * v[i];
    xm[i] -= kStep * v[i];
  }
  const auto yp = dense_forward(l, xp).y, ym = dense_forward(l, xm).y;
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_LT(rel_err(jv[j], (yp[j] - ym[j]) / (2 * kStep)), 1e-6);
  }
}

TEST(Dense, LinearInputGradientIsWTimesUpstream) {
  Rng rng(2);
  auto l = DenseLayer::glorot(5, 3, Activation::identity, rng);
  const Tensor1D x = rvec(5, rng), up = rvec(3, rng);
  DenseGrads g(l);
  const auto dx = dense_backward(l, dense_forward(l, x).cache, up, g);
  for (std::size_t i = 0; i < 5; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < 3; ++j) want += l.W(i, j) * up[j];
    EXPECT_NEAR(dx[i], want, 1e-15);
  }
}

TEST(Dense, ZeroUpstreamGivesZeroGrads) {
  Rng rng(3);
  auto l = DenseLayer::glorot(5, 3, Activation::relu, rng);
  DenseGrads g(l);
  const auto dx = dense_backward(l, dense_forward(l, rvec(5, rng)).cache, Tensor1D(3, 0.0), g);
  for (double v : dx) EXPECT_EQ(v, 0.0);
  for (double v : g.W.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.b) EXPECT_EQ(v, 0.0);
}

TEST(Dense, ParameterGradientsMatchFiniteDifferences) {
  for (auto act : {Activation::identity, Activation::sigmoid, Activation::tanh, Activation::relu}) {
    Rng rng(17);
    auto l = DenseLayer::glorot(5, 4, act, rng);
    fill_random(l.b, rng);
    Tensor1D x = rvec(5, rng);
    const Tensor1D r = rvec(4, rng);
    DenseGrads g(l);
    const auto dx = dense_backward(l, dense_forward(l, x).cache, r, g);
    auto loss = [&] { return dot(r, dense_forward(l, x).y); };
    EXPECT_LT(fd_max_err(l.W.values(), g.W.values(), loss), 1e-6) << to_string(act);
    EXPECT_LT(fd_max_err(l.b, g.b, loss), 1e-6) << to_string(act);
    EXPECT_LT(fd_max_err(x, dx, loss), 1e-6) << to_string(act);
  }
}

// ---------------------------------------------------------------------------
// LSTM step

TEST(LstmStep, ZeroCellZeroState) {
  const auto cell = LstmCell::zeros(3, 2);
  const auto out = lstm_step(cell, Tensor1D(2, 0.0), Tensor1D(2, 0.0), Tensor1D{1, -2, 3});
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(out.cache.i[j], 0.5);
    EXPECT_EQ(out.cache.f[j], 0.5);
    EXPECT_EQ(out.cache.o[j], 0.5);
    EXPECT_EQ(out.cache.q[j], 0.0);
    EXPECT_EQ(out.c[j], 0.0);
    EXPECT_EQ(out.h[j], 0.0);
  }
}

TEST(LstmStep, ZeroCellHalvesMemory) {
  const auto cell = LstmCell::zeros(3, 2);
  const Tensor1D c{0.8, -3.0};
  const auto out = lstm_step(cell, Tensor1D{0.3, 0.1}, c, Tensor1D{1, 2, 3});
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(out.c[j], 0.5 * c[j]);
    EXPECT_DOUBLE_EQ(out.h[j], 0.5 * std::tanh(0.5 * c[j]));
  }
}

TEST(LstmStep, GlorotSetsForgetBias) {
  Rng rng(1);
  const auto cell = LstmCell::glorot(3, 4, rng);
  for (double v : cell.b_f) EXPECT_EQ(v, 1.0);
  for (double v : cell.b_i) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(cell.W_i.rows(), 7u);
  EXPECT_EQ(cell.input_dim(), 3u);
}

TEST(LstmStep, GatesStayInRange) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    auto cell = LstmCell::zeros(3, 4);
    for (auto* W : {&cell.W_i, &cell.W_f, &cell.W_o, &cell.W_q}) fill_random(W->values(), rng, 5.0);
    for (auto* b : {&cell.b_i, &cell.b_f, &cell.b_o, &cell.b_q}) fill_random(*b, rng, 5.0);
    const auto out = lstm_step(cell, rvec(4, rng, 3), rvec(4, rng, 3), rvec(3, rng, 10));
    for (std::size_t j = 0; j < 4; ++j) {
      for (double g : {out.cache.i[j], out.cache.f[j], out.cache.o[j]}) {
        EXPECT_GE(g, 0.0);
        EXPECT_LE(g, 1.0);
      }
      EXPECT_GE(out.cache.q[j], -1.0);
      EXPECT_LE(out.cache.q[j], 1.0);
    }
  }
}

TEST(LstmStep, ShapeErrors) {
  const auto cell = LstmCell::zeros(3, 2);
  EXPECT_THROW(lstm_step(cell, Tensor1D(3, 0.0), Tensor1D(2, 0.0), Tensor1D(3, 0.0)), ShapeError);
  EXPECT_THROW(lstm_step(cell, Tensor1D(2, 0.0), Tensor1D(2, 0.0), Tensor1D(4, 0.0)), ShapeError);
}

TEST(LstmStep, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  auto cell = LstmCell::zeros(4, 3);
  for (auto* W : {&cell.W_i, &cell.W_f, &cell.W_o, &cell.W_q}) fill_random(W->values(), rng, 0.8);
  for (auto* b : {&cell.b_i, &cell.b_f, &cell.b_o, &cell.b_q}) fill_random(*b, rng, 0.5);
  Tensor1D h = rvec(3, rng), c = rvec(3, rng), x = rvec(4, rng);
  const Tensor1D rh = rvec(3, rng), rc = rvec(3, rng);

  const auto fwd = lstm_step(cell, h, c, x);
  LstmGrads g(cell);
  const auto back = lstm_step_backward(cell, fwd.cache, rh, rc, g);
  // Measured against the unperturbed outputs so round-off scales with the step.
  auto loss = [&] {
    const auto o = lstm_step(cell, h, c, x);
    return projected_delta(rh, o.h, fwd.h) + projected_delta(rc, o.c, fwd.c);
  };
  double worst = 0.0;
  worst = std::max(worst, fd_max_err(cell.W_i.values(), g.W_i.values(), loss));
  worst = std::max(worst, fd_max_err(cell.W_f.values(), g.W_f.values(), loss));
  worst = std::max(worst, fd_max_err(cell.W_o.values(), g.W_o.values(), loss));
  worst = std::max(worst, fd_max_err(cell.W_q.values(), g.W_q.values(), loss));
  worst = std::max(worst, fd_max_err(cell.b_i, g.b_i, loss));
  worst = std::max(worst, fd_max_err(cell.b_f, g.b_f, loss));
  worst = std::max(worst, fd_max_err(cell.b_o, g.b_o, loss));
  worst = std::max(worst, fd_max_err(cell.b_q, g.b_q, loss));
  worst = std::max(worst, fd_max_err(h, back.dh_prev, loss));
  worst = std::max(worst, fd_max_err(c, back.dc_prev, loss));
  worst = std::max(worst, fd_max_err(x, back.dx, loss));
  EXPECT_LT(worst, 1e-5);
}

// ---------------------------------------------------------------------------
// BiLSTM

BiLstmEncoder random_encoder(std::size_t in, std::size_t H, Rng& rng) {
  BiLstmEncoder e{LstmCell::zeros(in, H), LstmCell::zeros(in, H)};
  for (auto* cell : {&e.forward_cell, &e.backward_cell}) {
    for (auto* W : {&cell->W_i, &cell->W_f, &cell->W_o, &cell->W_q}) fill_random(W->values(), rng, 0.8);
    for (auto* b : {&cell->b_i, &cell->b_f, &cell->b_o, &cell->b_q}) fill_random(*b, rng, 0.5);
  }
  return e;
}

Tensor2D rmat(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2D m(r, c);
  fill_random(m.values(), rng);
  return m;
}

TEST(BiLstm, SingleStepIsConcatenationOfCells) {
  Rng rng(4);
  const auto enc = random_encoder(3, 2, rng);
  const Tensor2D X = rmat(1, 3, rng);
  const auto out = bilstm_forward(enc, X);
  const Tensor1D zero(2, 0.0);
  const auto f = lstm_step(enc.forward_cell, zero, zero, X.row(0));
  const auto b = lstm_step(enc.backward_cell, zero, zero, X.row(0));
  EXPECT_EQ(Tensor1D(out.H.row(0).begin(), out.H.row(0).end()), concat({f.h, b.h}));
}

TEST(BiLstm, ZeroCellsGiveZeroOutput) {
  Rng rng(4);
  const BiLstmEncoder enc{LstmCell::zeros(3, 2), LstmCell::zeros(3, 2)};
  const auto out = bilstm_forward(enc, rmat(6, 3, rng));
  EXPECT_EQ(out.H.rows(), 6u);
  EXPECT_EQ(out.H.cols(), 4u);
  for (double v : out.H.values()) EXPECT_EQ(v, 0.0);
}

TEST(BiLstm, WrongInputWidthIsShapeError) {
  const BiLstmEncoder enc{LstmCell::zeros(3, 2), LstmCell::zeros(3, 2)};
  EXPECT_THROW(bilstm_forward(enc, Tensor2D(4, 5)), ShapeError);
}

TEST(BiLstm, DirectionalCausality) {
  Rng rng(8);
  const auto enc = random_encoder(3, 4, rng);
  const std::size_t T = 6;
  const Tensor2D X = rmat(T, 3, rng);
  const auto base = bilstm_forward(enc, X).H;
  for (std::size_t p = 0; p < T; ++p) {
    Tensor2D Xp = X;
    for (double& v : Xp.row(p)) v += 0.7;
    const auto H = bilstm_forward(enc, Xp).H;
    for (std::size_t t = 0; t < T; ++t) {
      bool fwd_same = true, bwd_same = true;
      for (std::size_t j = 0; j < 4; ++j) {
        fwd_same = fwd_same && H(t, j) == base(t, j);
        bwd_same = bwd_same && H(t, 4 + j) == base(t, 4 + j);
      }
      // Forward half at t sees inputs up to t; backward half sees inputs from t on.
      EXPECT_EQ(fwd_same, t < p) << "t=" << t << " p=" << p;
      EXPECT_EQ(bwd_same, t > p) << "t=" << t << " p=" << p;
    }
  }
}

TEST(BiLstm, BackpropThroughTimeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    auto enc = random_encoder(3, 3, rng);
    Tensor2D X = rmat(3, 3, rng);
    const Tensor2D R = rmat(3, 6, rng);
    const auto fwd = bilstm_forward(enc, X);
    BiLstmGrads g(enc);
    const Tensor2D dX = bilstm_backward(enc, fwd.cache, R, g);
    auto loss = [&] { return projected_delta(R.values(), bilstm_forward(enc, X).H.values(), fwd.H.values()); };
    double worst = fd_max_err(X.values(), dX.values(), loss);
    for (auto [cell, cg] : {std::pair{&enc.forward_cell, &g.forward_cell},
                            std::pair{&enc.backward_cell, &g.backward_cell}}) {
      worst = std::max(worst, fd_max_err(cell->W_i.values(), cg->W_i.values(), loss));
      worst = std::max(worst, fd_max_err(cell->W_f.values(), cg->W_f.values(), loss));
      worst = std::max(worst, fd_max_err(cell->W_o.values(), cg->W_o.values(), loss));
      worst = std::max(worst, fd_max_err(cell->W_q.values(), cg->W_q.values(), loss));
      worst = std::max(worst, fd_max_err(cell->b_i, cg->b_i, loss));
      worst = std::max(worst, fd_max_err(cell->b_f, cg->b_f, loss));
      worst = std::max(worst, fd_max_err(cell->b_o, cg->b_o, loss));
      worst = std::max(worst, fd_max_err(cell->b_q, cg->b_q, loss));
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

// ---------------------------------------------------------------------------
// Attention

TEST(Attention, ZeroParametersAreUniform) {
  Rng rng(1);
  const Tensor2D H = rmat(4, 3, rng);
  const auto out = attention_forward(FeedforwardAttention::zeros(3), H, std::vector<std::uint8_t>(4, 1));
  for (double a : out.alphas) EXPECT_EQ(a, 0.25);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(out.a[j], (H(0, j) + H(1, j) + H(2, j) + H(3, j)) / 4, 1e-15);
  }
}

TEST(Attention, IdenticalRowsReturnThatRow) {
  Rng rng(2);
  const Tensor1D h = rvec(5, rng);
  Tensor2D H(6, 5);
  for (std::size_t t = 0; t < 6; ++t) std::copy(h.begin(), h.end(), H.row(t).begin());
  for (int trial = 0; trial < 20; ++trial) {
    FeedforwardAttention attn{rvec(5, rng, 3), rng.uniform(-2, 2)};
    const auto out = attention_forward(attn, H, std::vector<std::uint8_t>(6, 1));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(out.a[j], h[j], 1e-14);
  }
}

TEST(Attention, AllMaskedIsAnError) {
  EXPECT_THROW(attention_forward(FeedforwardAttention::zeros(2), Tensor2D(3, 2), std::vector<std::uint8_t>(3, 0)),
               NoAttendablePositions);
}

TEST(Attention, ShapeErrors) {
  EXPECT_THROW(attention_forward(FeedforwardAttention::zeros(2), Tensor2D(3, 4), std::vector<std::uint8_t>(3, 1)),
               ShapeError);
  EXPECT_THROW(attention_forward(FeedforwardAttention::zeros(2), Tensor2D(3, 2), std::vector<std::uint8_t>(2, 1)),
               ShapeError);
}

TEST(Attention, SimplexMaskAndConvexHull) {
  Rng rng(55);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t T = 1 + rng.uniform_int(10), D = 1 + rng.uniform_int(6);
    const Tensor2D H = rmat(T, D, rng);
    std::vector<std::uint8_t> mask(T);
    for (auto& m : mask) m = rng.bernoulli(0.7);
    mask[rng.uniform_int(T)] = 1;
    FeedforwardAttention attn{rvec(D, rng, 4), rng.uniform(-2, 2)};
    const auto out = attention_forward(attn, H, mask);
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (!mask[t]) EXPECT_EQ(out.alphas[t], 0.0);
      EXPECT_GE(out.alphas[t], 0.0);
      sum += out.alphas[t];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t j = 0; j < D; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t t = 0; t < T; ++t) {
        if (!mask[t]) continue;
        lo = std::min(lo, H(t, j));
        hi = std::max(hi, H(t, j));
      }
      EXPECT_GE(out.a[j], lo - 1e-12);
      EXPECT_LE(out.a[j], hi + 1e-12);
    }
  }
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  Rng rng(13);
  FeedforwardAttention attn{rvec(4, rng), rng.uniform(-0.5, 0.5)};
  Tensor2D H = rmat(5, 4, rng);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1};
  const Tensor1D r = rvec(4, rng);
  const auto fwd = attention_forward(attn, H, mask);
  AttentionGrads g(attn);
  const Tensor2D dH = attention_backward(attn, fwd.cache, r, g);
  auto loss = [&] { return projected_delta(r, attention_forward(attn, H, mask).a, fwd.a); };
  EXPECT_LT(fd_max_err(attn.w, g.w, loss), 1e-5);
  EXPECT_LT(fd_max_err(std::span(&attn.b, 1), std::span<const double>(&g.b, 1), loss), 1e-5);
  EXPECT_LT(fd_max_err(H.values(), dH.values(), loss), 1e-5);
  for (double v : dH.row(2)) EXPECT_EQ(v, 0.0);
}

// ---------------------------------------------------------------------------
// Classifier head

TEST(Classifier, ZeroHeadIsUniform) {
  const auto head = DenseLayer::zeros(6, 13, Activation::identity);
  for (double p : classifier_forward(head, Tensor1D(6, 1.0)).probs) EXPECT_NEAR(p, 1.0 / 13, 1e-16);
}

TEST(Classifier, ForcedLogits) {
  DenseLayer head{Tensor2D(1, 2, {std::log(3.0), 0.0}), Tensor1D{0, 0}, Activation::identity};
  const auto p = classifier_forward(head, Tensor1D{1.0}).probs;
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(Classifier, RequiresIdentityActivation) {
  EXPECT_THROW(classifier_forward(DenseLayer::zeros(2, 3, Activation::relu), Tensor1D(2, 0.0)), ArgumentError);
}

TEST(Classifier, CrossEntropyLogitGradientIsProbsMinusOneHot) {
  Rng rng(19);
  auto head = DenseLayer::glorot(6, 5, Activation::identity, rng);
  fill_random(head.b, rng);
  const Tensor1D c = rvec(6, rng);
  const std::size_t label = 3;
  const auto fwd = classifier_forward(head, c);
  const Tensor1D z0 = fwd.cache.y;
  for (std::size_t j = 0; j < 5; ++j) {
    // Difference form of the loss keeps round-off at the perturbation scale.
    Tensor1D zp = z0, zm = z0;
    zp[j] += kStep;
    zm[j] -= kStep;
    const double numeric = (cross_entropy_delta(zp, z0, label) - cross_entropy_delta(zm, z0, label)) / (2 * kStep);
    const double analytic = fwd.probs[j] - (j == label ? 1.0 : 0.0);
    EXPECT_NEAR(analytic, numeric, 1e-10);
  }
}

TEST(Classifier, GenericBackwardMatchesXentSpecialisation) {
  Rng rng(23);
  auto head = DenseLayer::glorot(4, 6, Activation::identity, rng);
  const auto fwd = classifier_forward(head, rvec(4, rng));
  const std::size_t label = 2;
  Tensor1D dprobs(6, 0.0);
  dprobs[label] = -1.0 / fwd.probs[label];
  DenseGrads g1(head), g2(head);
  const auto a = classifier_backward(head, fwd, dprobs, g1);
  const auto b = classifier_backward_xent(head, fwd, label, g2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
  for (std::size_t i = 0; i < g1.W.size(); ++i) EXPECT_NEAR(g1.W.values()[i], g2.W.values()[i], 1e-14);
}

// ---------------------------------------------------------------------------
// Library harness and determinism

TEST(GradCheckLayer, EveryLayerAcrossSeeds) {
  for (auto kind : kAllLayerKinds) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto res = grad_check_layer(kind, seed);
      EXPECT_FALSE(res.blocks.empty());
      EXPECT_LT(res.max_rel_err(), 1e-4) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(Determinism, ForwardAndBackwardAreBitIdentical) {
  auto run = [] {
    Rng rng(77);
    auto enc = random_encoder(3, 4, rng);
    FeedforwardAttention attn{rvec(8, rng), 0.1};
    const Tensor2D X = rmat(5, 3, rng);
    const std::vector<std::uint8_t> mask{1, 1, 1, 1, 0};
    const auto h = bilstm_forward(enc, X);
    const auto a = attention_forward(attn, h.H, mask);
    AttentionGrads ag(attn);
    BiLstmGrads bg(enc);
    const auto dH = attention_backward(attn, a.cache, rvec(8, rng), ag);
    const auto dX = bilstm_backward(enc, h.cache, dH, bg);
    Tensor1D out = a.a;
    out.insert(out.end(), dX.values().begin(), dX.values().end());
    out.insert(out.end(), bg.forward_cell.W_q.values().begin(), bg.forward_cell.W_q.values().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace fusenet
