#include <gtest/gtest.h>

#include <cmath>

#include "sqseg/network.hpp"
#include "sqseg/nn_ops.hpp"
#include "sqseg/weights.hpp"
#include "testkit.hpp"

using namespace sqseg;

namespace {

float max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  float m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<float> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Weights zero_weights(const NetworkSpec& spec) {
  auto w = init_weights(spec, 0);
  for (const auto& p : enumerate_parameters(spec))
    if (p.role == ParamRole::ConvWeight || p.role == ParamRole::Bias)
      for (float& v : w.get_mutable(p.name).values()) v = 0.0f;
  return w;
}

Weights block_weights(const std::vector<ParamDecl>& decls, RngStream& rng, bool zero_convs) {
  Weights w;
  for (const auto& d : decls) {
    Tensor t(d.shape);
    switch (d.role) {
      case ParamRole::ConvWeight:
      case ParamRole::Bias:
        if (!zero_convs) t = testkit::random_tensor(d.shape, rng, -0.3f, 0.3f);
        break;
      case ParamRole::BnGamma:
      case ParamRole::BnVar:
        for (float& v : t.values()) v = 1.0f;
        break;
      default:
        break;
    }
    w.add(d.name, std::move(t));
  }
  return w;
}

}  // namespace

TEST(Conv2d, AllOnesNeighbourhoodSums) {
  Tensor in({1, 3, 3}, 1.0f), k({1, 1, 3, 3}, 1.0f);
  const auto out = conv2d(in, k);
  EXPECT_FLOAT_EQ(out.at(0, 1, 1), 9.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 1), 6.0f);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 4.0f);
}

TEST(Conv2d, DilationTapCount) {
  Tensor in({1, 5, 5}, 1.0f), k({1, 1, 3, 3}, 1.0f);
  EXPECT_FLOAT_EQ(conv2d(in, k, {1, 2, 1}).at(0, 2, 2), 9.0f);
}

TEST(Conv2d, ShapeErrors) {
  Tensor in({4, 8, 8});
  EXPECT_THROW(conv2d(in, Tensor({2, 3, 3, 3})), TensorError);
  EXPECT_THROW(conv2d(in, Tensor({2, 4, 2, 2})), TensorError);
  EXPECT_THROW(conv2d(in, Tensor({3, 2, 3, 3}), {1, 1, 2}), TensorError);
  EXPECT_THROW(conv2d(in, Tensor({2, 4, 3, 3}), {}, std::vector<float>(3)), TensorError);
}

TEST(Conv2d, MatchesNaiveLoops) {
  RngStream rng(1);
  struct Case { int cin, cout, k, stride, dil, groups, h, w; };
  const Case cases[] = {{4, 6, 3, 1, 1, 1, 8, 8},  {4, 6, 3, 2, 1, 1, 8, 7},  {4, 4, 5, 2, 1, 4, 9, 8},
                        {6, 6, 3, 1, 3, 6, 11, 8}, {3, 5, 1, 1, 1, 1, 8, 8},  {8, 4, 7, 1, 2, 2, 10, 12},
                        {6, 9, 1, 2, 1, 3, 7, 9},  {5, 5, 3, 1, 7, 1, 6, 6}};
  for (const auto& c : cases) {
    const auto in = testkit::random_tensor({static_cast<std::size_t>(c.cin), static_cast<std::size_t>(c.h), static_cast<std::size_t>(c.w)}, rng);
    const auto k = testkit::random_tensor({static_cast<std::size_t>(c.cout), static_cast<std::size_t>(c.cin / c.groups),
                                           static_cast<std::size_t>(c.k), static_cast<std::size_t>(c.k)}, rng);
    const auto bias = vec(testkit::random_tensor({static_cast<std::size_t>(c.cout)}, rng));
    const auto want = testkit::naive_conv(in, k, c.stride, c.dil, c.groups, bias);
    for (int threads : {1, 3}) EXPECT_LE(max_abs_diff(conv2d(in, k, {c.stride, c.dil, c.groups}, bias, threads), want), 1e-5f);
  }
}

TEST(TransposedConv2d, SizesAndZeroKernel) {
  RngStream rng(2);
  const auto in = testkit::random_tensor({3, 1, 1}, rng);
  const auto k = testkit::random_tensor({3, 2, 3, 3}, rng);
  EXPECT_EQ(transposed_conv2d(in, k).shape(), (Shape{2, 2, 2}));
  const auto big = testkit::random_tensor({3, 5, 4}, rng);
  const auto z = transposed_conv2d(big, Tensor({3, 2, 3, 3}));
  for (float v : z.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(transposed_conv2d(big, Tensor({2, 2, 3, 3})), TensorError);
}

TEST(TransposedConv2d, MatchesNaiveScatter) {
  RngStream rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto in = testkit::random_tensor({static_cast<std::size_t>(rng.uniform_int(1, 6)), static_cast<std::size_t>(rng.uniform_int(1, 7)),
                                            static_cast<std::size_t>(rng.uniform_int(1, 7))}, rng);
    const auto k = testkit::random_tensor({in.channels(), static_cast<std::size_t>(rng.uniform_int(1, 5)), 3, 3}, rng);
    const auto bias = vec(testkit::random_tensor({k.dim(1)}, rng));
    const auto want = testkit::naive_transposed_conv(in, k, bias);
    for (int threads : {1, 4}) EXPECT_LE(max_abs_diff(transposed_conv2d(in, k, bias, threads), want), 1e-5f);
  }
}

TEST(TransposedConv2d, AdjointOfStridedConv) {
  RngStream rng(4);
  for (int i = 0; i < 10; ++i) {
    const std::size_t ci = 3, co = 4, h = 6, w = 8;
    // conv: co <- ci with kernel (co, ci); transposed reads it as (C_in=co, C_out=ci).
    const auto x = testkit::random_tensor({ci, 2 * h, 2 * w}, rng);
    const auto y = testkit::random_tensor({co, h, w}, rng);
    const auto k = testkit::random_tensor({co, ci, 3, 3}, rng);
    const auto cx = conv2d(x, k, {2, 1, 1});
    const auto ty = transposed_conv2d(y, k);
    double lhs = 0, rhs = 0;
    for (std::size_t p = 0; p < cx.size(); ++p) lhs += static_cast<double>(cx[p]) * y[p];
    for (std::size_t p = 0; p < x.size(); ++p) rhs += static_cast<double>(x[p]) * ty[p];
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(BatchNorm, FormulaCases) {
  RngStream rng(5);
  const auto x = testkit::random_tensor({3, 4, 4}, rng);
  std::vector<float> one(3, 1.0f), zero(3, 0.0f);
  const auto y = batchnorm_infer(x, {one, zero, zero, one});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(y[i], x[i] / std::sqrt(1.001f));
  std::vector<float> beta{0.5f, -1.0f, 2.0f};
  const auto g0 = batchnorm_infer(x, {zero, beta, zero, one});
  for (std::size_t c = 0; c < 3; ++c)
    for (float v : g0.channel(c)) EXPECT_EQ(v, beta[c]);
  const auto gamma = vec(testkit::random_tensor({3}, rng)), mean = vec(testkit::random_tensor({3}, rng));
  const std::vector<float> var{0.5f, 2.0f, 0.1f};
  const auto r = batchnorm_infer(x, {gamma, beta, mean, var});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < x.plane(); ++i) {
      const double want = gamma[c] * (x.channel(c)[i] - mean[c]) / std::sqrt(var[c] + 1e-3) + beta[c];
      EXPECT_NEAR(r.channel(c)[i], want, 1e-5);
    }
  const std::vector<float> neg{1.0f, -0.5f, 1.0f};
  EXPECT_THROW(batchnorm_infer(x, {one, zero, zero, neg}), TensorError);
}

TEST(Activations, ClosedForms) {
  EXPECT_EQ(swish(0.0f), 0.0f);
  EXPECT_EQ(sigmoid(0.0f), 0.5f);
  EXPECT_NEAR(swish(1.0f), 0.731059f, 1e-6f);
  for (float x : {-80.0f, -30.0f, 30.0f, 80.0f}) {
    EXPECT_TRUE(std::isfinite(sigmoid(x)));
    EXPECT_TRUE(std::isfinite(swish(x)));
  }
  EXPECT_NEAR(swish(80.0f), 80.0f, 1e-4f);
  EXPECT_NEAR(swish(-80.0f), 0.0f, 1e-6f);
}

TEST(SqueezeExcite, GatingCases) {
  RngStream rng(6);
  const auto x = testkit::random_tensor({4, 5, 5}, rng);
  Tensor rw({2, 4, 1, 1}), ew({4, 2, 1, 1});
  std::vector<float> rb(2, 0.0f), eb(4, 0.0f);
  const auto half = squeeze_excite(x, {&rw, rb, &ew, eb});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(half[i], x[i] * 0.5f);
  std::vector<float> big(4, 100.0f);
  const auto same = squeeze_excite(x, {&rw, rb, &ew, big});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(same[i], x[i]);
}

TEST(SqueezeExcite, MatchesScalarSteps) {
  RngStream rng(7);
  const auto x = testkit::random_tensor({6, 4, 3}, rng);
  const auto rw = testkit::random_tensor({2, 6, 1, 1}, rng), ew = testkit::random_tensor({6, 2, 1, 1}, rng);
  const auto rb = vec(testkit::random_tensor({2}, rng)), eb = vec(testkit::random_tensor({6}, rng));
  const auto got = squeeze_excite(x, {&rw, rb, &ew, eb});
  std::vector<double> pooled(6), hidden(2), gate(6);
  for (std::size_t c = 0; c < 6; ++c) {
    for (float v : x.channel(c)) pooled[c] += v;
    pooled[c] /= 12.0;
  }
  for (std::size_t r = 0; r < 2; ++r) {
    double a = rb[r];
    for (std::size_t c = 0; c < 6; ++c) a += rw[r * 6 + c] * pooled[c];
    hidden[r] = a / (1.0 + std::exp(-a));
  }
  for (std::size_t c = 0; c < 6; ++c) {
    double a = eb[c];
    for (std::size_t r = 0; r < 2; ++r) a += ew[c * 2 + r] * hidden[r];
    gate[c] = 1.0 / (1.0 + std::exp(-a));
  }
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(got.channel(c)[i], x.channel(c)[i] * gate[c], 1e-5);
}

TEST(Scaling, FiltersAndRepeats) {
  EXPECT_EQ(scale_filters(320, 1.2), 384);
  EXPECT_EQ(scale_filters(32, 1.0), 32);
  EXPECT_EQ(scale_filters(4, 1.0), 8);
  EXPECT_EQ(scale_repeats(3, 1.4), 5);
  EXPECT_EQ(scale_repeats(5, 1.1), 6);
  EXPECT_EQ(scale_repeats(3, 1.1), 4);
  EXPECT_EQ(scale_repeats(1, 1.0), 1);
  EXPECT_THROW(scale_filters(8, 0.0), std::invalid_argument);
  EXPECT_THROW(build_efficient_unet(-1.0, 1.0), std::invalid_argument);
}

TEST(Architecture, BaselineLayout) {
  const auto spec = build_efficient_unet(Variant::B0);
  ASSERT_EQ(spec.encoder.size(), 8u);
  ASSERT_EQ(spec.decoder.size(), 14u);
  EXPECT_EQ(spec.encoder[0].kind, StageKind::Stem);
  EXPECT_EQ(spec.encoder[0].filters, 32);
  EXPECT_EQ(spec.encoder[0].kernel, 3);
  EXPECT_TRUE(spec.encoder[0].stride2);
  EXPECT_EQ(spec.in_channels, 5);
  EXPECT_EQ(spec.decoder.back().kind, StageKind::Head);
  EXPECT_EQ(spec.decoder.back().filters, 1);
  EXPECT_EQ(spec.decoder.back().kernel, 1);
  const int want_f[] = {32, 16, 24, 40, 80, 112, 192, 320};
  const int want_r[] = {1, 1, 2, 2, 3, 3, 5, 1};
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(spec.encoder[i].filters, want_f[i]);
    if (i > 0) EXPECT_EQ(spec.encoder[i].repeats, want_r[i]);
  }
  EXPECT_EQ(spec.skips, (std::vector<SkipLink>{{5, 0}, {3, 4}, {2, 7}, {1, 9}}));
}

TEST(Architecture, ScalingKeepsKernelsAndBlockCounts) {
  const auto b0 = build_efficient_unet(Variant::B0);
  for (auto v : {Variant::B1, Variant::B2, Variant::B3}) {
    const auto s = build_efficient_unet(v);
    ASSERT_EQ(s.encoder.size(), b0.encoder.size());
    ASSERT_EQ(s.decoder.size(), b0.decoder.size());
    for (std::size_t i = 0; i < s.decoder.size(); ++i) {
      EXPECT_EQ(s.decoder[i].kind, b0.decoder[i].kind);
      EXPECT_EQ(s.decoder[i].kernel, b0.decoder[i].kernel);
      EXPECT_EQ(s.decoder[i].rms_kernels, b0.decoder[i].rms_kernels);
      EXPECT_EQ(s.decoder[i].rms_dilations, b0.decoder[i].rms_dilations);
    }
  }
  EXPECT_EQ(build_efficient_unet(Variant::B3).encoder[7].filters, 384);
}

TEST(Architecture, ValidationCatchesBrokenSpecs) {
  auto spec = build_efficient_unet(Variant::B0);
  spec.encoder[2].stride2 = false;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = build_efficient_unet(Variant::B0);
  spec.skips[0].encoder_stage = 3;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = build_efficient_unet(Variant::B0);
  for (auto& s : spec.decoder)
    if (s.kind == StageKind::RMS) {
      s.rms_kernels.pop_back();
      break;
    }
  EXPECT_THROW(spec.validate(), std::invalid_argument);
  spec = build_efficient_unet(Variant::B0);
  spec.encoder[3].kernel = 4;
  EXPECT_THROW(spec.validate(), std::invalid_argument);
}

TEST(Architecture, SpecJsonRoundTrip) {
  for (auto v : {Variant::B0, Variant::B3}) {
    const auto spec = build_efficient_unet(v);
    const nlohmann::json j = spec;
    EXPECT_EQ(j.get<NetworkSpec>(), spec);
  }
}

TEST(ParameterCount, MatchesSymbolicOracleAndIsMonotone) {
  std::uint64_t prev = 0;
  for (auto v : {Variant::B0, Variant::B1, Variant::B2, Variant::B3}) {
    const auto f = scaling_for(v);
    const auto n = count_parameters(build_efficient_unet(v));
    EXPECT_EQ(n, testkit::symbolic_parameter_count(f.width, f.depth)) << to_string(v);
    EXPECT_GT(n, prev);
    prev = n;
  }
}

TEST(ParameterCount, StemAndFirstMirseByHand) {
  StageSpec stem;
  stem.kind = StageKind::Stem;
  stem.kernel = 3;
  stem.filters = 32;
  stem.stride2 = true;
  std::uint64_t n = 0;
  for (const auto& p : block_parameters(stem, 5, "s"))
    if (p.trainable()) n += shape_elements(p.shape);
  EXPECT_EQ(n, 3u * 3 * 5 * 32 + 2 * 32);  // bias-free conv + BN gamma/beta

  StageSpec m;
  m.kind = StageKind::MIRSE;
  m.kernel = 3;
  m.filters = 16;
  m.repeats = 1;
  m.expand_ratio = 1;
  n = 0;
  for (const auto& p : block_parameters(m, 32, "m"))
    if (p.trainable()) n += shape_elements(p.shape);
  // depthwise 3x3 on 32 + BN, SE 32->8->32 with biases, project 32->16 + BN
  const std::uint64_t want = (32 * 9 + 64) + (32 * 8 + 8 + 8 * 32 + 32) + (32 * 16 + 32);
  EXPECT_EQ(n, want);
}

TEST(Blocks, ZeroedMirseIsIdentity) {
  StageSpec s;
  s.kind = StageKind::MIRSE;
  s.kernel = 5;
  s.filters = 16;
  s.repeats = 2;
  RngStream rng(8);
  const auto w = block_weights(block_parameters(s, 16, "b"), rng, true);
  const auto x = testkit::random_tensor({16, 12, 12}, rng);
  EXPECT_EQ(mirse_forward(x, s, w, "b"), x);
}

TEST(Blocks, ZeroedRmsIsIdentity) {
  StageSpec s;
  s.kind = StageKind::RMS;
  s.rms_kernels = {3, 5, 5, 7};
  s.rms_dilations = {3, 3, 5, 7};
  s.filters = 8;
  RngStream rng(9);
  const auto w = block_weights(block_parameters(s, 8, "r"), rng, true);
  const auto x = testkit::random_tensor({8, 16, 16}, rng);
  EXPECT_EQ(rms_forward(x, s, w, "r"), x);
  EXPECT_THROW(rms_forward(testkit::random_tensor({4, 16, 16}, rng), s, w, "r"), TensorError);
}

TEST(Blocks, StrideAndShapes) {
  StageSpec s;
  s.kind = StageKind::MIRSE;
  s.kernel = 3;
  s.filters = 24;
  s.repeats = 2;
  s.stride2 = true;
  RngStream rng(10);
  const auto w = block_weights(block_parameters(s, 16, "b"), rng, false);
  EXPECT_EQ(mirse_forward(testkit::random_tensor({16, 64, 64}, rng), s, w, "b").shape(), (Shape{24, 32, 32}));

  StageSpec r;
  r.kind = StageKind::RMS;
  r.rms_kernels = {3, 3, 5, 5};
  r.rms_dilations = {1, 3, 3, 5};
  r.filters = 8;
  const auto rw = block_weights(block_parameters(r, 8, "r"), rng, false);
  EXPECT_EQ(rms_forward(testkit::random_tensor({8, 9, 13}, rng), r, rw, "r").shape(), (Shape{8, 9, 13}));
  EXPECT_THROW(mirse_forward(testkit::random_tensor({16, 8, 8}, rng), s, Weights{}, "b"), WeightsError);
}

TEST(Network, ZeroWeightsGiveHalf) {
  const auto spec = build_efficient_unet(Variant::B0);
  const auto w = zero_weights(spec);
  const auto out = network_forward(spec, w, Tensor({5, 64, 64}, 0.3f));
  ASSERT_EQ(out.shape(), (Shape{1, 64, 64}));
  for (float v : out.values()) EXPECT_EQ(v, 0.5f);
}

TEST(Network, ShapeClosureAcrossSizes) {
  const auto spec = build_efficient_unet(Variant::B0);
  auto net = EfficientUNet(spec, std::make_shared<const Weights>(init_weights(spec, 3)));
  RngStream rng(11);
  for (auto [h, w] : {std::pair{32, 32}, {64, 96}, {160, 32}, {256, 256}}) {
    const auto out = net.forward(testkit::random_tensor({5, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, rng, 0, 1));
    ASSERT_EQ(out.shape(), (Shape{1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}));
    for (float v : out.values()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
  }
}

TEST(Network, InputContractErrors) {
  const auto spec = build_efficient_unet(Variant::B0);
  auto net = EfficientUNet(spec, std::make_shared<const Weights>(init_weights(spec, 3)));
  try {
    net.forward(Tensor({5, 48, 64}));
    FAIL() << "expected an error";
  } catch (const TensorError& e) {
    EXPECT_NE(std::string(e.what()).find("multiples of 32"), std::string::npos);
  }
  EXPECT_THROW(net.forward(Tensor({4, 32, 32})), TensorError);
}

TEST(Network, NonFiniteValueNamesLayer) {
  const auto spec = build_efficient_unet(Variant::B0);
  auto w = init_weights(spec, 3);
  w.get_mutable("encoder.3.r1.dw.conv.weight")[0] = std::numeric_limits<float>::quiet_NaN();
  EfficientUNet net(spec, std::make_shared<const Weights>(std::move(w)));
  try {
    net.forward(Tensor({5, 32, 32}, 0.5f));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.layer, "encoder.3.r1.dw");
  }
  auto ok = EfficientUNet(spec, std::make_shared<const Weights>(init_weights(spec, 3)));
  Tensor bad({5, 32, 32}, 0.0f);
  bad[17] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(ok.forward(bad), NumericalError);
}

TEST(Network, BitIdenticalAcrossThreadCounts) {
  const auto spec = build_efficient_unet(Variant::B1);
  EfficientUNet net(spec, std::make_shared<const Weights>(init_weights(spec, 4)));
  RngStream rng(12);
  const auto in = testkit::random_tensor({5, 64, 96}, rng, 0, 1);
  const auto a = net.forward(in, 1);
  EXPECT_EQ(a, net.forward(in, 4));
  EXPECT_EQ(a, net.forward(in, 3));
}

TEST(Network, ConstructorRejectsIncompleteWeights) {
  const auto spec = build_efficient_unet(Variant::B0);
  auto w = init_weights(spec, 1);
  Weights partial;
  for (const auto& e : w.entries())
    if (e.name != "decoder.13.conv.bias") partial.add(e.name, e.tensor);
  EXPECT_THROW(EfficientUNet(spec, std::make_shared<const Weights>(partial)), WeightsError);
  w.add("extra.weight", Tensor({1}));
  EXPECT_THROW(EfficientUNet(spec, std::make_shared<const Weights>(w)), WeightsError);
}

TEST(InitWeights, DeterministicAndBounded) {
  const auto spec = build_efficient_unet(Variant::B0);
  const auto a = init_weights(spec, 5), b = init_weights(spec, 5), c = init_weights(spec, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const auto& k = a.get("encoder.0.conv.weight");
  const float bound = std::sqrt(6.0f / 45.0f);
  for (float v : k.values()) EXPECT_LE(std::abs(v), bound);
  for (float v : a.get("encoder.0.bn.gamma").values()) EXPECT_EQ(v, 1.0f);
  for (float v : a.get("encoder.0.bn.running_var").values()) EXPECT_EQ(v, 1.0f);
  for (float v : a.get("encoder.0.bn.running_mean").values()) EXPECT_EQ(v, 0.0f);
}
