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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fusenet/fusion.hpp"
#include "fusenet/train.hpp"

namespace fusenet {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.num_feature_dim = 4;
  c.cat_feature_dim = 3;
  c.embed_dim = 5;
  c.lstm_hidden = 3;
  c.mlp_hidden = 4;
  c.num_classes = 6;
  c.max_seq_len = 4;
  c.seed = 9;
  return c;
}

ModelInput random_input(const ModelConfig& c, Rng& rng, std::size_t real = 3) {
  ModelInput in;
  in.id = "case-1";
  in.numerical.resize(c.num_feature_dim);
  for (double& v : in.numerical) v = rng.normal();
  in.categorical.assign(c.cat_feature_dim, 0.0);
  in.categorical[rng.uniform_int(c.cat_feature_dim)] = 1.0;
  in.text.vectors = Tensor2D(c.max_seq_len, c.embed_dim);
  in.text.mask.assign(c.max_seq_len, 0);
  for (std::size_t t = 0; t < real; ++t) {
    in.text.mask[t] = 1;
    for (double& v : in.text.vectors.row(t)) v = rng.normal();
  }
  return in;
}

TEST(Build, SameSeedIsBitIdentical) {
  ModelConfig c;
  c.embed_dim = 16;
  const auto a = build(Variant::fusion, c);
  const auto b = build(Variant::fusion, c);
  EXPECT_EQ(serialize(a), serialize(b));
  c.seed = 2;
  EXPECT_NE(serialize(a), serialize(build(Variant::fusion, c)));
}

TEST(Build, HeadInputDimIsSumOfBranches) {
  ModelConfig c;
  c.num_feature_dim = 100;
  c.cat_feature_dim = 20;
  c.embed_dim = 8;
  c.lstm_hidden = 64;
  c.mlp_hidden = 64;
  const auto m = build(Variant::fusion, c);
  EXPECT_EQ(m.head_input_dim(), 256u);
  EXPECT_EQ(m.head.in_dim(), 256u);
  EXPECT_EQ(m.head.out_dim(), 13u);
}

TEST(Build, BaselineHeadsShrink) {
  const auto c = small_config();
  EXPECT_EQ(build(Variant::text_only, c).head.in_dim(), 2 * c.lstm_hidden);
  EXPECT_EQ(build(Variant::mlp_only, c).head.in_dim(), 2 * c.mlp_hidden);
  const auto t = build(Variant::text_only, c);
  EXPECT_FALSE(t.mlp_num.has_value());
  EXPECT_TRUE(t.encoder.has_value());
  const auto m = build(Variant::mlp_only, c);
  EXPECT_FALSE(m.encoder.has_value());
  EXPECT_FALSE(m.attention.has_value());
}

TEST(Build, InvalidConfigIsRejected) {
  auto c = small_config();
  c.num_classes = 1;
  EXPECT_THROW(build(Variant::fusion, c), ConfigError);
  c = small_config();
  c.lstm_hidden = 0;
  EXPECT_THROW(build(Variant::fusion, c), ConfigError);
}

TEST(Build, InjectedHeadMismatchFailsValidation) {
  auto m = build(Variant::fusion, small_config());
  m.head = DenseLayer::zeros(m.head_input_dim() + 1, 6, Activation::identity);
  EXPECT_THROW(m.validate(), ShapeError);
  EXPECT_THROW(serialize(m), ShapeError);
}

TEST(Forward, ZeroModelIsUniform) {
  const auto c = small_config();
  for (auto v : {Variant::fusion, Variant::mlp_only, Variant::text_only}) {
    auto m = build(v, c);
    fill_blocks(m, 0.0);
    Rng rng(1);
    for (double p : forward(m, random_input(c, rng)).probs) EXPECT_NEAR(p, 1.0 / 6, 1e-15);
  }
}

TEST(Forward, EmptyTextNamesTheExample) {
  const auto c = small_config();
  const auto m = build(Variant::fusion, c);
  Rng rng(1);
  auto in = random_input(c, rng, 0);
  in.id = "ticket-42";
  try {
    forward(m, in);
    FAIL();
  } catch (const NoAttendablePositions& e) {
    EXPECT_NE(std::string(e.what()).find("ticket-42"), std::string::npos);
  }
  // The tabular baseline never looks at text.
  EXPECT_NO_THROW(forward(build(Variant::mlp_only, c), in));
}

TEST(Forward, BranchShapeErrors) {
  const auto c = small_config();
  const auto m = build(Variant::fusion, c);
  Rng rng(1);
  auto in = random_input(c, rng);
  in.numerical.push_back(1.0);
  EXPECT_THROW(forward(m, in), ShapeError);
  in = random_input(c, rng);
  in.text.vectors = Tensor2D(c.max_seq_len, c.embed_dim + 1);
  EXPECT_THROW(forward(m, in), ShapeError);
}

TEST(Forward, MlpOnlyIgnoresText) {
  const auto c = small_config();
  const auto m = build(Variant::mlp_only, c);
  Rng rng(3);
  auto in = random_input(c, rng);
  const auto base = forward(m, in).probs;
  for (double& v : in.text.vectors.values()) v += rng.normal();
  EXPECT_EQ(forward(m, in).probs, base);
}

TEST(Forward, TextOnlyIgnoresTabular) {
  const auto c = small_config();
  const auto m = build(Variant::text_only, c);
  Rng rng(3);
  auto in = random_input(c, rng);
  const auto base = forward(m, in).probs;
  for (double& v : in.numerical) v += 5.0;
  EXPECT_EQ(forward(m, in).probs, base);
}

TEST(Forward, ZeroTextHeadColumnsIsolateTabularBranches) {
  const auto c = small_config();
  auto m = build(Variant::fusion, c);
  // Rows of the head fed by the attention output.
  for (std::size_t r = m.tabular_out_dim(); r < m.head.in_dim(); ++r) {
    for (double& v : m.head.W.row(r)) v = 0.0;
  }
  Rng rng(4);
  auto in = random_input(c, rng);
  const auto base = forward(m, in).probs;
  for (double& v : in.text.vectors.values()) v = rng.normal();
  EXPECT_EQ(forward(m, in).probs, base);
  in.numerical[0] += 1.0;
  EXPECT_NE(forward(m, in).probs, base);
}

TEST(Forward, ConcatenationOrderIsNumericalCategoricalText) {
  const auto c = small_config();
  auto m = build(Variant::fusion, c);
  Rng rng(5);
  const auto in = random_input(c, rng);
  const auto r = forward(m, in);
  const auto& x = r.cache.head.cache.x;
  const auto h_num = dense_forward((*m.mlp_num)[1], dense_forward((*m.mlp_num)[0], in.numerical).y).y;
  const auto h_cat = dense_forward((*m.mlp_cat)[1], dense_forward((*m.mlp_cat)[0], in.categorical).y).y;
  const auto enc = bilstm_forward(*m.encoder, in.text.vectors);
  const auto att = attention_forward(*m.attention, enc.H, in.text.mask);
  EXPECT_EQ(x, concat({h_num, h_cat, att.a}));
}

TEST(Forward, ArgmaxStableUnderPositiveScaling) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto head = DenseLayer::zeros(5, 7, Activation::identity);
    for (double& v : head.W.values()) v = rng.normal();
    Tensor1D c(5);
    for (double& v : c) v = rng.normal();
    const auto top = top_k_indices(classifier_forward(head, c).probs, 1)[0];
    const double s = rng.uniform(0.01, 20);
    for (double& v : c) v *= s;
    EXPECT_EQ(top_k_indices(classifier_forward(head, c).probs, 1)[0], top);
  }
}

TEST(EndToEnd, GradientCheckAllVariants) {
  for (auto v : {Variant::fusion, Variant::mlp_only, Variant::text_only}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto res = grad_check(v, seed);
      const double tol = v == Variant::mlp_only ? 1e-5 : 1e-4;
      EXPECT_LT(res.max_rel_err(), tol) << to_string(v) << " seed " << seed;
    }
  }
}

TEST(EndToEnd, GradCheckCoversEveryParameterBlock) {
  const auto gc = make_grad_check_case(Variant::fusion, 0);
  const auto res = grad_check(Variant::fusion, 0);
  std::size_t blocks = 0;
  for_each_block(gc.model, [&](const std::string&, auto, std::size_t, std::size_t) { ++blocks; });
  EXPECT_EQ(res.blocks.size(), blocks);
  EXPECT_LE(gc.model.config.lstm_hidden, 8u);
  EXPECT_LE(gc.input.text.length(), 5u);
}

TEST(TopK, TieBreakTowardLowerIndex) {
  EXPECT_EQ(top_k_indices(Tensor1D{0.5, 0.3, 0.1, 0.1}, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(top_k_indices(Tensor1D{0.25, 0.25, 0.25, 0.25}, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(TopK, FullKIsAPermutation) {
  Rng rng(3);
  Tensor1D p(13);
  for (double& v : p) v = rng.uniform();
  auto idx = top_k_indices(p, 13);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> all(13);
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_EQ(idx, all);
}

TEST(TopK, MatchesFullSortOracle) {
  Rng rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 2 + rng.uniform_int(15);
    Tensor1D p(K);
    // Coarse values force ties.
    for (double& v : p) v = static_cast<double>(rng.uniform_int(6)) / 5.0;
    const std::size_t k = 1 + rng.uniform_int(K);
    std::vector<std::size_t> oracle(K);
    std::iota(oracle.begin(), oracle.end(), std::size_t{0});
    std::stable_sort(oracle.begin(), oracle.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    oracle.resize(k);
    EXPECT_EQ(top_k_indices(p, k), oracle);
  }
}

TEST(TopK, OutOfRangeK) {
  EXPECT_THROW(top_k_indices(Tensor1D{0.5, 0.5}, 0), ArgumentError);
  EXPECT_THROW(top_k_indices(Tensor1D{0.5, 0.5}, 3), ArgumentError);
  const auto c = small_config();
  const auto m = build(Variant::mlp_only, c);
  Rng rng(1);
  EXPECT_THROW(predict_topk(m, random_input(c, rng), 7), ArgumentError);
}

TEST(TopK, PredictionsDescend) {
  const auto c = small_config();
  const auto m = build(Variant::fusion, c);
  Rng rng(2);
  const auto p = predict_topk(m, random_input(c, rng), 6);
  for (std::size_t i = 1; i < p.top_k.size(); ++i) EXPECT_GE(p.probs[p.top_k[i - 1]], p.probs[p.top_k[i]]);
}

// ---------------------------------------------------------------------------
// Checkpoints

class ModelFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("fusenet_fusion_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::filesystem::path dir_;
};

TEST_F(ModelFile, RoundTripIsBitExact) {
  const auto c = small_config();
  for (auto v : {Variant::fusion, Variant::mlp_only, Variant::text_only}) {
    auto m = build(v, c);
    m.metadata["note"] = "hello world";
    save(m, path("m.bin"));
    const auto back = load(path("m.bin"));
    EXPECT_EQ(back.variant, v);
    EXPECT_EQ(back.config, c);
    EXPECT_EQ(back.metadata, m.metadata);
    EXPECT_EQ(serialize(back), serialize(m));
    Rng rng(8);
    const auto in = random_input(c, rng);
    EXPECT_EQ(forward(back, in).probs, forward(m, in).probs);
  }
}

TEST_F(ModelFile, SpecialValuesSurvive) {
  auto m = build(Variant::mlp_only, small_config());
  m.head.b[0] = -0.0;
  m.head.b[1] = 5e-324;
  m.head.b[2] = 1.7976931348623157e308;
  const auto back = deserialize(serialize(m));
  EXPECT_TRUE(std::signbit(back.head.b[0]));
  EXPECT_EQ(back.head.b[1], 5e-324);
  EXPECT_EQ(back.head.b[2], 1.7976931348623157e308);
}

TEST_F(ModelFile, TruncatedFileIsCorrupt) {
  const std::string bytes = serialize(build(Variant::fusion, small_config()));
  try {
    deserialize(std::string_view(bytes).substr(0, bytes.size() - 3));
    FAIL();
  } catch (const ModelFileError& e) {
    EXPECT_NE(std::string(e.what()).find("corrupt"), std::string::npos) << e.what();
  }
  try {
    deserialize(std::string_view(bytes).substr(0, 40));
    FAIL();
  } catch (const ModelFileError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos) << e.what();
  }
  EXPECT_THROW(deserialize(bytes + "xx"), ModelFileError);
}

TEST_F(ModelFile, VersionBumpIsAVersionError) {
  std::string bytes = serialize(build(Variant::fusion, small_config()));
  bytes.replace(bytes.find("format_version 1"), 16, "format_version 2");
  try {
    deserialize(bytes);
    FAIL();
  } catch (const ModelFileError& e) {
    EXPECT_EQ(e.field(), "format_version");
  }
}

TEST_F(ModelFile, ShapeInconsistencyNamesTheBlock) {
  std::string bytes = serialize(build(Variant::fusion, small_config()));
  bytes.replace(bytes.find("block head.W 14 6"), 17, "block head.W 15 6");
  try {
    deserialize(bytes);
    FAIL();
  } catch (const ModelFileError& e) {
    EXPECT_EQ(e.field(), "head.W");
  }
}

TEST_F(ModelFile, WrongBranchOrderIsRejected) {
  std::string bytes = serialize(build(Variant::fusion, small_config()));
  bytes.replace(bytes.find("numerical,categorical,text"), 26, "text,numerical,categorical");
  try {
    deserialize(bytes);
    FAIL();
  } catch (const ModelFileError& e) {
    EXPECT_EQ(e.field(), "branch_order");
  }
}

TEST_F(ModelFile, NotAModelFile) {
  std::ofstream(path("junk")) << "hello\n";
  EXPECT_THROW(load(path("junk")), ModelFileError);
  EXPECT_THROW(load(path("missing")), Error);
}

}  // namespace
}  // namespace fusenet
