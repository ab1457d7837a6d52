#include "svkit/network.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.h"
#include "svkit/common.h"
#include "svkit/tensor.h"
#include "svkit/weights.h"

using namespace svkit;

namespace {

Tensor3 random_tensor(int t, int f, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor3 x(t, f, c);
  x.data = oracle::random_floats(x.data.size(), rng);
  return x;
}

FeatureMap random_features(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMap f(frames, 64);
  f.values = oracle::random_floats(f.values.size(), rng);
  return f;
}

void add_bn(NetworkWeights& w, const std::string& p, int c) {
  w.add(p + ".gamma", {static_cast<std::uint32_t>(c)}, std::vector<float>(c, 1.0f));
  w.add(p + ".beta", {static_cast<std::uint32_t>(c)});
  w.add(p + ".mean", {static_cast<std::uint32_t>(c)});
  w.add(p + ".var", {static_cast<std::uint32_t>(c)}, std::vector<float>(c, 1.0f));
}

FrameMatrix frames_of(std::vector<std::vector<float>> rows) {
  FrameMatrix m;
  m.count = static_cast<int>(rows.size());
  m.dim = static_cast<int>(rows[0].size());
  for (auto& r : rows) m.data.insert(m.data.end(), r.begin(), r.end());
  return m;
}

}  // namespace

TEST(Conv2d, OutputShapes) {
  const Tensor3 x(201, 64, 1);
  const std::vector<float> k(9 * 32, 0.01f);
  const auto same = conv2d(x, k, 3, 32, 1);
  EXPECT_EQ(same.time, 201);
  EXPECT_EQ(same.freq, 64);
  EXPECT_EQ(same.channels, 32);
  const auto half = conv2d(x, k, 3, 32, 2);
  EXPECT_EQ(half.time, 101);
  EXPECT_EQ(half.freq, 32);
  EXPECT_EQ(conv_output_size(51, 3, 2, 1), 26);
}

TEST(Conv2d, OneByOneIdentity) {
  const Tensor3 x = random_tensor(7, 5, 3, 1);
  std::vector<float> eye(9, 0.0f);
  for (int c = 0; c < 3; ++c) eye[c * 3 + c] = 1.0f;
  EXPECT_EQ(conv2d(x, eye, 1, 3, 1).data, x.data);
}

TEST(Conv2d, MatchesDirectSummation) {
  std::mt19937_64 rng(3);
  for (int stride : {1, 2}) {
    for (int k : {1, 3}) {
      const Tensor3 x = random_tensor(13, 9, 4, 10 + stride + k);
      const auto kernel = oracle::random_floats(static_cast<std::size_t>(k * k * 4 * 6), rng);
      const auto fast = conv2d(x, kernel, k, 6, stride);
      const auto slow = oracle::direct_conv2d(x, kernel, k, 6, stride);
      ASSERT_EQ(fast.time, slow.time);
      ASSERT_EQ(fast.freq, slow.freq);
      for (std::size_t i = 0; i < fast.data.size(); ++i) {
        ASSERT_NEAR(fast.data[i], slow.data[i], 1e-4) << "k=" << k << " stride=" << stride;
      }
    }
  }
}

TEST(Conv2d, Errors) {
  const Tensor3 x(4, 4, 2);
  EXPECT_THROW(conv2d(x, std::vector<float>(9 * 2 * 3 - 1), 3, 3, 1), Error);
  EXPECT_THROW(conv2d(x, std::vector<float>(25 * 2 * 3), 5, 3, 1), Error);
}

TEST(BatchNorm, Examples) {
  Tensor3 x(1, 1, 1);
  x.data = {1.5f};
  std::vector<float> one{1}, zero{0};
  batchnorm_infer(x, {one, zero, zero, one}, 0.0);
  EXPECT_EQ(x.data[0], 1.5f);

  Tensor3 y(1, 1, 1);
  y.data = {2.0f};
  std::vector<float> gamma{2}, beta{1}, mean{1}, var{0.25f};
  batchnorm_infer(y, {gamma, beta, mean, var}, 0.0);
  // 2 * (2 - 1) / 0.5 + 1
  EXPECT_FLOAT_EQ(y.data[0], 5.0f);

  std::vector<float> four{4};
  Tensor3 z(1, 1, 1);
  z.data = {2.0f};
  batchnorm_infer(z, {one, zero, zero, four}, 0.0);
  EXPECT_FLOAT_EQ(z.data[0], 1.0f);

  std::vector<float> negative{-1};
  EXPECT_THROW(batchnorm_infer(x, {one, zero, zero, negative}), Error);
  EXPECT_THROW(batchnorm_infer(x, {one, zero, zero, zero}, 0.0), Error);
}

TEST(ResidualBlock, ZeroWeightsPassReluOfInput) {
  const Tensor3 x = random_tensor(9, 8, 4, 2);
  NetworkWeights w;
  w.add("b.conv1.weight", {3, 3, 4, 4});
  add_bn(w, "b.bn1", 4);
  w.add("b.conv2.weight", {3, 3, 4, 4});
  add_bn(w, "b.bn2", 4);
  const auto y = residual_block(x, w, "b.", 4, 1);
  for (std::size_t i = 0; i < x.data.size(); ++i) EXPECT_EQ(y.data[i], std::max(x.data[i], 0.0f));
}

TEST(ResidualBlock, StridedBlockUsesProjection) {
  const Tensor3 x = random_tensor(101, 32, 8, 2);
  NetworkWeights w;
  w.add("b.conv1.weight", {3, 3, 8, 16});
  add_bn(w, "b.bn1", 16);
  w.add("b.conv2.weight", {3, 3, 16, 16});
  add_bn(w, "b.bn2", 16);
  EXPECT_THROW(residual_block(x, w, "b.", 16, 2), Error);
  std::mt19937_64 rng(5);
  w.add("b.downsample.weight", {1, 1, 8, 16}, oracle::random_floats(8 * 16, rng));
  add_bn(w, "b.downsample_bn", 16);
  const auto y = residual_block(x, w, "b.", 16, 2);
  EXPECT_EQ(y.time, 51);
  EXPECT_EQ(y.freq, 16);
  EXPECT_EQ(y.channels, 16);
  // With zero residual convolutions the output is ReLU(BN(projection)).
  const auto s = conv2d(x, w.values("b.downsample.weight"), 1, 16, 2);
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    ASSERT_NEAR(y.data[i], std::max(s.data[i] / std::sqrt(1.0f + 1e-5f), 0.0f), 1e-5);
  }
}

TEST(Pooling, IdenticalFramesPoolToTheFrame) {
  std::mt19937_64 rng(1);
  const std::vector<float> h{0.5f, -1.0f, 2.0f};
  const auto m = frames_of({h, h, h, h});
  const auto weight = oracle::random_floats(3 * 4, rng);
  const auto bias = oracle::random_floats(4, rng);
  const auto ctx = oracle::random_floats(4, rng);
  const AttentionView attn{weight, bias, ctx};
  const auto sap = sap_pool(m, attn);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(sap.pooled[d], h[d], 1e-6);
  const auto asp = asp_pool(m, attn, 1e-5);
  for (int d = 0; d < 3; ++d) {
    EXPECT_NEAR(asp.pooled[d], h[d], 1e-6);
    EXPECT_NEAR(asp.pooled[3 + d], std::sqrt(1e-5), 1e-6);
  }
}

TEST(Pooling, ZeroContextGivesPlainMean) {
  std::mt19937_64 rng(2);
  const auto m = frames_of({{1, 2}, {3, 4}, {8, 0}});
  const auto weight = oracle::random_floats(2 * 5, rng);
  const auto bias = oracle::random_floats(5, rng);
  const std::vector<float> ctx(5, 0.0f);
  const auto r = sap_pool(m, {weight, bias, ctx});
  EXPECT_NEAR(r.pooled[0], 4.0, 1e-6);
  EXPECT_NEAR(r.pooled[1], 2.0, 1e-6);
}

TEST(Pooling, TwoFrameHandComputed) {
  // Attention dim 1, W = [1; 0], b = 0, u = 1: logits tanh(h_0).
  const auto m = frames_of({{0, 10}, {1, -10}});
  const std::vector<float> weight{1, 0}, bias{0}, ctx{1};
  const double e0 = std::exp(std::tanh(0.0)), e1 = std::exp(std::tanh(1.0));
  const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
  const auto r = sap_pool(m, {weight, bias, ctx});
  EXPECT_NEAR(r.attention[0], a0, 1e-7);
  EXPECT_NEAR(r.attention[1], a1, 1e-7);
  EXPECT_NEAR(r.pooled[0], a1, 1e-6);
  EXPECT_NEAR(r.pooled[1], 10 * a0 - 10 * a1, 1e-5);
}

TEST(Pooling, AspMeanAndDeviation) {
  const auto m = frames_of({{0}, {2}});
  const std::vector<float> weight{0}, bias{0}, ctx{0};
  const auto r = asp_pool(m, {weight, bias, ctx}, 1e-5);
  ASSERT_EQ(r.pooled.size(), 2u);
  EXPECT_NEAR(r.pooled[0], 1.0, 1e-7);
  EXPECT_NEAR(r.pooled[1], 1.0, 1e-7);
}

TEST(Pooling, AspDoublesDimension) {
  std::mt19937_64 rng(4);
  FrameMatrix m;
  m.count = 26;
  m.dim = 2048;
  m.data = oracle::random_floats(26 * 2048, rng);
  const auto weight = oracle::random_floats(2048 * 128, rng, 0.02f);
  const auto bias = oracle::random_floats(128, rng);
  const auto ctx = oracle::random_floats(128, rng);
  EXPECT_EQ(asp_pool(m, {weight, bias, ctx}, 1e-5).pooled.size(), 4096u);
}

TEST(Pooling, AttentionIsADistributionAndShiftInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    FrameMatrix m;
    m.count = 1 + trial;
    m.dim = 6;
    m.data = oracle::random_floats(static_cast<std::size_t>(m.count) * 6, rng, 3.0f);
    const auto weight = oracle::random_floats(6 * 4, rng);
    const auto bias = oracle::random_floats(4, rng);
    const auto ctx = oracle::random_floats(4, rng, 5.0f);
    const auto a = attention_weights(m, {weight, bias, ctx});
    double sum = 0.0;
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Rotating the frame order rotates the weights.
    FrameMatrix rolled = m;
    std::rotate(rolled.data.begin(), rolled.data.begin() + 6, rolled.data.end());
    const auto b = attention_weights(rolled, {weight, bias, ctx});
    for (int t = 0; t < m.count; ++t) EXPECT_NEAR(b[t], a[(t + 1) % m.count], 1e-12);
  }
}

TEST(Pooling, FlattenKeepsFrequencyMajorOrder) {
  Tensor3 x(2, 3, 2);
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(i);
  const auto flat = flatten_frames(x, false);
  EXPECT_EQ(flat.dim, 6);
  EXPECT_EQ(flat.row(1)[0], 6.0f);
  const auto avg = flatten_frames(x, true);
  EXPECT_EQ(avg.dim, 2);
  EXPECT_FLOAT_EQ(avg.row(0)[0], 2.0f);  // (0 + 2 + 4) / 3
  EXPECT_FLOAT_EQ(avg.row(0)[1], 3.0f);
}

TEST(Forward, HalfWidthAspTrace) {
  const auto cfg = TrunkConfig::h_asp();
  const auto w = init_weights(cfg, 1);
  ForwardTrace trace;
  const auto e = forward(random_features(201, 3), w, cfg, &trace);
  ASSERT_EQ(trace.stage_shapes.size(), 5u);
  const std::array<std::array<int, 3>, 5> expected{{
      {201, 64, 32}, {201, 64, 32}, {101, 32, 64}, {51, 16, 128}, {26, 8, 256}}};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(trace.stage_shapes[i], expected[i]);
  EXPECT_EQ(trace.frames, 26);
  EXPECT_EQ(trace.frame_dim, 2048);
  EXPECT_EQ(trace.pooled_dim, 4096);
  EXPECT_EQ(trace.embed_dim, 512);
  EXPECT_EQ(e.size(), 512u);
}

TEST(Forward, QuarterWidthSapTrace) {
  const auto cfg = TrunkConfig::q_sap();
  const auto w = init_weights(cfg, 1);
  ForwardTrace trace;
  const auto e = forward(random_features(201, 3), w, cfg, &trace);
  EXPECT_EQ(trace.stage_shapes.front(), (std::array<int, 3>{101, 32, 16}));
  EXPECT_EQ(trace.stage_shapes.back(), (std::array<int, 3>{13, 4, 128}));
  EXPECT_EQ(trace.frame_dim, 128);
  EXPECT_EQ(trace.pooled_dim, 128);
  EXPECT_EQ(e.size(), 512u);
}

TEST(Forward, DeterministicAndSensitiveToInput) {
  const auto cfg = TrunkConfig::q_sap();
  const auto w = init_weights(cfg, 7);
  const auto f = random_features(120, 1);
  const auto a = forward(f, w, cfg);
  EXPECT_EQ(a, forward(f, w, cfg));
  EXPECT_NE(a, forward(random_features(120, 2), w, cfg));
}

TEST(Forward, FiniteOnRandomInputs) {
  const auto cfg = TrunkConfig::q_sap();
  const auto w = init_weights(cfg, 11);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> frames(1, 12);
  std::uniform_real_distribution<float> scale(0.01f, 10.0f);
  for (int trial = 0; trial < 1000; ++trial) {
    FeatureMap f(frames(rng), 64);
    f.values = oracle::random_floats(f.values.size(), rng, scale(rng));
    for (float v : forward(f, w, cfg)) ASSERT_TRUE(std::isfinite(v)) << "trial " << trial;
  }
}

TEST(Forward, RejectsMismatchedInput) {
  const auto cfg = TrunkConfig::q_sap();
  const auto w = init_weights(cfg, 1);
  EXPECT_THROW(forward(FeatureMap(50, 40), w, cfg), Error);
  EXPECT_THROW(validate_weights(w, TrunkConfig::h_asp()), Error);
}

TEST(Weights, ParameterCounts) {
  const auto q = init_weights(TrunkConfig::q_sap(), 0).parameter_count();
  const auto h = init_weights(TrunkConfig::h_asp(), 0).parameter_count();
  EXPECT_EQ(q, 1415728u);
  EXPECT_EQ(h, 7683424u);
  NetworkWeights single;
  single.add("conv.weight", {3, 3, 1, 1});
  EXPECT_EQ(single.parameter_count(), 9u);
  add_bn(single, "bn", 4);
  EXPECT_EQ(single.parameter_count(), 17u);
  EXPECT_EQ(single.scalar_count(), 25u);
}

TEST(Weights, ContainerRoundTripIsBitExact) {
  auto cfg = TrunkConfig::q_sap();
  cfg.embed_bn = true;
  auto w = init_weights(cfg, 3);
  w.get("fc.bias").data[0] = -0.0f;
  w.get("fc.bias").data[1] = std::numeric_limits<float>::denorm_min();
  const auto path = std::filesystem::temp_directory_path() / "svkit_network_test.svw1";
  save_weights(path, w);
  const auto r = load_weights(path);
  EXPECT_TRUE(r == w);
  EXPECT_EQ(encode_weights(r), encode_weights(w));
  std::filesystem::remove(path);

  auto bytes = encode_weights(w);
  bytes.push_back(0);
  EXPECT_THROW(decode_weights(bytes), Error);
  bytes.resize(bytes.size() - 9);
  EXPECT_THROW(decode_weights(bytes), Error);
}

TEST(Weights, DuplicateAndMissingNames) {
  NetworkWeights w;
  w.add("a", {2});
  EXPECT_THROW(w.add("a", {2}), Error);
  EXPECT_THROW(w.add("b", {2}, {1.0f}), Error);
  EXPECT_THROW(w.get("missing"), Error);
}

TEST(Weights, InferConfig) {
  auto cfg = TrunkConfig::h_asp();
  cfg.embed_bn = true;
  const auto inferred = infer_config(init_weights(cfg, 0));
  EXPECT_EQ(inferred.variant, Variant::HAsp);
  EXPECT_TRUE(inferred.embed_bn);
  EXPECT_EQ(infer_config(init_weights(TrunkConfig::q_sap(), 0)).variant, Variant::QSap);
  EXPECT_EQ(parse_variant("h-asp"), Variant::HAsp);
  EXPECT_THROW(parse_variant("resnet"), Error);
}
