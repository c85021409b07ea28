#include "sqseg/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sqseg/nn_ops.hpp"
#include "sqseg/random.hpp"
#include "sqseg/weights.hpp"

namespace sqseg {

const char* to_string(StageKind kind) {
  switch (kind) {
    case StageKind::Stem: return "Stem";
    case StageKind::MIRSE: return "MIRSE";
    case StageKind::Upscale: return "Upscale";
    case StageKind::RMS: return "RMS";
    case StageKind::Head: return "Head";
  }
  return "?";
}

namespace {

StageKind parse_kind(const std::string& s) {
  for (auto k : {StageKind::Stem, StageKind::MIRSE, StageKind::Upscale, StageKind::RMS, StageKind::Head})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown stage kind '" + s + "'");
}

void fail(const std::string& what) { throw std::invalid_argument("NetworkSpec: " + what); }

}  // namespace

void StageSpec::validate() const {
  if (filters < 1) fail("filters must be >= 1");
  switch (kind) {
    case StageKind::Stem:
    case StageKind::Head:
    case StageKind::MIRSE:
      if (kernel < 1 || kernel % 2 == 0) fail("kernel size must be odd");
      break;
    case StageKind::RMS:
      if (rms_kernels.size() != 4 || rms_dilations.size() != 4) fail("RMS needs exactly four (K, D) pairs");
      for (int k : rms_kernels)
        if (k < 1 || k % 2 == 0) fail("RMS kernel sizes must be odd");
      for (int d : rms_dilations)
        if (d < 1) fail("RMS dilations must be >= 1");
      break;
    case StageKind::Upscale:
      break;
  }
  if (kind == StageKind::MIRSE) {
    if (repeats < 1) fail("MIRSE repeats must be >= 1");
    if (expand_ratio < 1) fail("MIRSE expand ratio must be >= 1");
    if (!(squeeze_ratio > 0.0)) fail("MIRSE squeeze ratio must be > 0");
  }
}

void NetworkSpec::validate() const {
  if (in_channels < 1 || out_channels < 1) fail("channel counts must be >= 1");
  if (encoder.empty() || decoder.empty()) fail("encoder and decoder must be non-empty");
  for (const auto& s : encoder) s.validate();
  for (const auto& s : decoder) s.validate();
  if (encoder.front().kind != StageKind::Stem) fail("encoder must start with the stem");
  if (decoder.back().kind != StageKind::Head) fail("decoder must end with the head");

  // Resolution bookkeeping in units of log2 downsampling.
  std::vector<int> enc_level(encoder.size());
  int level = 0;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const auto& s = encoder[i];
    if (s.kind == StageKind::Upscale || s.kind == StageKind::Head) fail("encoder holds decoder-only stages");
    if (s.stride2) ++level;
    enc_level[i] = level;
  }
  if (level != 5) fail("encoder must contain exactly five stride-2 reductions");
  int ups = 0;
  std::map<int, int> skip_for;
  for (const auto& sk : skips) {
    if (sk.encoder_stage < 0 || sk.encoder_stage >= static_cast<int>(encoder.size()) ||
        sk.decoder_stage < 0 || sk.decoder_stage >= static_cast<int>(decoder.size()))
      fail("skip index out of range");
    if (decoder[sk.decoder_stage].kind != StageKind::Upscale) fail("skips must land on Upscale stages");
    if (!skip_for.emplace(sk.decoder_stage, sk.encoder_stage).second) fail("duplicate skip target");
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const auto& s = decoder[i];
    if (s.kind == StageKind::Stem) fail("decoder holds a stem");
    if (s.stride2) fail("decoder stages cannot stride");
    if (s.kind == StageKind::Upscale) {
      --level;
      ++ups;
      if (auto it = skip_for.find(static_cast<int>(i)); it != skip_for.end() && enc_level[it->second] != level)
        fail("skip from encoder stage " + std::to_string(it->second) + " does not match decoder resolution");
    }
  }
  if (ups != 5 || level != 0) fail("decoder must contain exactly five upscales");
  if (decoder.back().filters != out_channels) fail("head filters must equal out_channels");
}

ScalingFactors scaling_for(Variant v) {
  switch (v) {
    case Variant::B0: return {1.0, 1.0};
    case Variant::B1: return {1.0, 1.1};
    case Variant::B2: return {1.1, 1.2};
    case Variant::B3: return {1.2, 1.4};
  }
  return {};
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::B0: return "B0";
    case Variant::B1: return "B1";
    case Variant::B2: return "B2";
    case Variant::B3: return "B3";
  }
  return "?";
}

std::optional<Variant> parse_variant(const std::string& name) {
  for (auto v : {Variant::B0, Variant::B1, Variant::B2, Variant::B3})
    if (name == to_string(v) || name == std::string("b") + (to_string(v) + 1)) return v;
  return std::nullopt;
}

int scale_filters(int filters, double width_mult) {
  if (!(width_mult > 0.0)) throw std::invalid_argument("width multiplier must be > 0");
  const double scaled = filters * width_mult;
  int rounded = std::max(8, static_cast<int>(scaled + 4.0) / 8 * 8);
  if (rounded < 0.9 * scaled) rounded += 8;
  return rounded;
}

int scale_repeats(int repeats, double depth_mult) {
  if (!(depth_mult > 0.0)) throw std::invalid_argument("depth multiplier must be > 0");
  // Guard against 3 * 1.1 landing a hair above an integer.
  return static_cast<int>(std::ceil(repeats * depth_mult - 1e-9));
}

namespace {

StageSpec stem(int k, int f) {
  StageSpec s;
  s.kind = StageKind::Stem;
  s.kernel = k;
  s.filters = f;
  s.stride2 = true;
  return s;
}

StageSpec mirse(int k, int f, int r, bool stride2 = false, int expand = 6) {
  StageSpec s;
  s.kind = StageKind::MIRSE;
  s.kernel = k;
  s.filters = f;
  s.repeats = r;
  s.stride2 = stride2;
  s.expand_ratio = expand;
  return s;
}

StageSpec upscale(int f) {
  StageSpec s;
  s.kind = StageKind::Upscale;
  s.kernel = 3;
  s.filters = f;
  return s;
}

StageSpec rms(std::vector<int> k, std::vector<int> d, int f) {
  StageSpec s;
  s.kind = StageKind::RMS;
  s.rms_kernels = std::move(k);
  s.rms_dilations = std::move(d);
  s.filters = f;
  return s;
}

StageSpec head(int f) {
  StageSpec s;
  s.kind = StageKind::Head;
  s.kernel = 1;
  s.filters = f;
  return s;
}

}  // namespace

NetworkSpec build_efficient_unet(double width_mult, double depth_mult) {
  if (!(width_mult > 0.0) || !(depth_mult > 0.0))
    throw std::invalid_argument("build_efficient_unet: scaling factors must be > 0");
  NetworkSpec spec;
  spec.width_mult = width_mult;
  spec.depth_mult = depth_mult;
  spec.encoder = {
      stem(3, 32),
      mirse(3, 16, 1, false, 1),
      mirse(3, 24, 2, true),
      mirse(5, 40, 2, true),
      mirse(3, 80, 3, true),
      mirse(5, 112, 3),
      mirse(5, 192, 5, true),
      mirse(3, 320, 1),
  };
  spec.decoder = {
      upscale(320),                             // 0: 1/32 -> 1/16
      mirse(5, 192, 3),                         // 1
      rms({3, 5, 5, 7}, {3, 3, 5, 7}, 192),     // 2
      mirse(5, 112, 3),                         // 3
      upscale(112),                             // 4: -> 1/8
      mirse(3, 80, 3),                          // 5
      rms({3, 3, 5, 5}, {1, 3, 3, 5}, 80),      // 6
      upscale(80),                              // 7: -> 1/4
      mirse(5, 40, 2),                          // 8
      upscale(40),                              // 9: -> 1/2
      mirse(3, 24, 2),                          // 10
      upscale(24),                              // 11: -> full resolution, no skip
      mirse(3, 16, 1),                          // 12
      head(1),                                  // 13
  };
  // Last encoder stage at each resolution feeds the matching upscale.
  spec.skips = {{5, 0}, {3, 4}, {2, 7}, {1, 9}};

  for (auto* stages : {&spec.encoder, &spec.decoder})
    for (auto& s : *stages) {
      if (s.kind != StageKind::Head) s.filters = scale_filters(s.filters, width_mult);
      if (s.kind == StageKind::MIRSE) s.repeats = scale_repeats(s.repeats, depth_mult);
    }

  spec.name = "efficient-unet(w=" + nlohmann::json(width_mult).dump() +
              ",d=" + nlohmann::json(depth_mult).dump() + ")";
  spec.validate();
  return spec;
}

NetworkSpec build_efficient_unet(Variant variant) {
  const auto f = scaling_for(variant);
  NetworkSpec spec = build_efficient_unet(f.width, f.depth);
  spec.name = std::string("efficient-unet-") + to_string(variant);
  return spec;
}

void to_json(nlohmann::json& j, const NetworkSpec& spec) {
  auto stages = [](const std::vector<StageSpec>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : list) {
      nlohmann::json o{{"kind", to_string(s.kind)}, {"filters", s.filters}};
      switch (s.kind) {
        case StageKind::MIRSE:
          o["kernel"] = s.kernel;
          o["repeats"] = s.repeats;
          o["stride2"] = s.stride2;
          o["expand_ratio"] = s.expand_ratio;
          o["squeeze_ratio"] = s.squeeze_ratio;
          break;
        case StageKind::RMS:
          o["kernels"] = s.rms_kernels;
          o["dilations"] = s.rms_dilations;
          break;
        case StageKind::Stem:
          o["kernel"] = s.kernel;
          o["stride2"] = s.stride2;
          break;
        default:
          o["kernel"] = s.kernel;
      }
      arr.push_back(std::move(o));
    }
    return arr;
  };
  nlohmann::json skips = nlohmann::json::array();
  for (const auto& s : spec.skips) skips.push_back({s.encoder_stage, s.decoder_stage});
  j = nlohmann::json{{"name", spec.name},
                     {"width_mult", spec.width_mult},
                     {"depth_mult", spec.depth_mult},
                     {"in_channels", spec.in_channels},
                     {"out_channels", spec.out_channels},
                     {"encoder", stages(spec.encoder)},
                     {"decoder", stages(spec.decoder)},
                     {"skips", skips}};
}

void from_json(const nlohmann::json& j, NetworkSpec& spec) {
  auto stages = [](const nlohmann::json& arr) {
    std::vector<StageSpec> out;
    for (const auto& o : arr) {
      StageSpec s;
      s.kind = parse_kind(o.at("kind").get<std::string>());
      s.filters = o.at("filters").get<int>();
      s.kernel = o.value("kernel", 3);
      s.repeats = o.value("repeats", 1);
      s.stride2 = o.value("stride2", false);
      s.expand_ratio = o.value("expand_ratio", 6);
      s.squeeze_ratio = o.value("squeeze_ratio", 0.25);
      if (s.kind == StageKind::RMS) {
        s.rms_kernels = o.at("kernels").get<std::vector<int>>();
        s.rms_dilations = o.at("dilations").get<std::vector<int>>();
      }
      out.push_back(std::move(s));
    }
    return out;
  };
  spec.name = j.value("name", std::string());
  spec.width_mult = j.at("width_mult").get<double>();
  spec.depth_mult = j.at("depth_mult").get<double>();
  spec.in_channels = j.value("in_channels", 5);
  spec.out_channels = j.value("out_channels", 1);
  spec.encoder = stages(j.at("encoder"));
  spec.decoder = stages(j.at("decoder"));
  spec.skips.clear();
  for (const auto& s : j.at("skips")) spec.skips.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  spec.validate();
}

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void add_bn(std::vector<ParamDecl>& out, const std::string& p, int c) {
  out.push_back({p + ".gamma", {sz(c)}, ParamRole::BnGamma});
  out.push_back({p + ".beta", {sz(c)}, ParamRole::BnBeta});
  out.push_back({p + ".running_mean", {sz(c)}, ParamRole::BnMean});
  out.push_back({p + ".running_var", {sz(c)}, ParamRole::BnVar});
}

void add_conv_bn(std::vector<ParamDecl>& out, const std::string& p, int cout, int cin_per_group, int k) {
  out.push_back({p + ".conv.weight", {sz(cout), sz(cin_per_group), sz(k), sz(k)}, ParamRole::ConvWeight});
  add_bn(out, p + ".bn", cout);
}

int se_channels(int block_in, double ratio) {
  return std::max(1, static_cast<int>(std::lround(block_in * ratio)));
}

void add_mirse_block(std::vector<ParamDecl>& out, const std::string& p, const StageSpec& s, int cin) {
  const int hidden = cin * s.expand_ratio;
  if (s.expand_ratio != 1) add_conv_bn(out, p + ".expand", hidden, cin, 1);
  add_conv_bn(out, p + ".dw", hidden, 1, s.kernel);
  const int r = se_channels(cin, s.squeeze_ratio);
  out.push_back({p + ".se.reduce.weight", {sz(r), sz(hidden), 1, 1}, ParamRole::ConvWeight});
  out.push_back({p + ".se.reduce.bias", {sz(r)}, ParamRole::Bias});
  out.push_back({p + ".se.expand.weight", {sz(hidden), sz(r), 1, 1}, ParamRole::ConvWeight});
  out.push_back({p + ".se.expand.bias", {sz(hidden)}, ParamRole::Bias});
  add_conv_bn(out, p + ".project", s.filters, hidden, 1);
}

std::string rep_prefix(const std::string& prefix, int r) { return prefix + ".r" + std::to_string(r); }

}  // namespace

std::vector<ParamDecl> block_parameters(const StageSpec& s, int cin, const std::string& prefix) {
  std::vector<ParamDecl> out;
  switch (s.kind) {
    case StageKind::Stem:
      add_conv_bn(out, prefix, s.filters, cin, s.kernel);
      break;
    case StageKind::MIRSE:
      for (int r = 0; r < s.repeats; ++r) add_mirse_block(out, rep_prefix(prefix, r), s, r == 0 ? cin : s.filters);
      break;
    case StageKind::Upscale:
      out.push_back({prefix + ".tconv.weight", {sz(cin), sz(s.filters), 3, 3}, ParamRole::ConvWeight});
      out.push_back({prefix + ".tconv.bias", {sz(s.filters)}, ParamRole::Bias});
      break;
    case StageKind::RMS:
      for (int b = 0; b < 4; ++b)
        add_conv_bn(out, prefix + ".branch" + std::to_string(b), s.filters, cin, s.rms_kernels[b]);
      add_conv_bn(out, prefix + ".fuse", s.filters, 4 * s.filters, 1);
      break;
    case StageKind::Head:
      out.push_back({prefix + ".conv.weight", {sz(s.filters), sz(cin), sz(s.kernel), sz(s.kernel)},
                     ParamRole::ConvWeight});
      out.push_back({prefix + ".conv.bias", {sz(s.filters)}, ParamRole::Bias});
      break;
  }
  return out;
}

namespace {

// Walks the network calling `visit(stage, in_channels, prefix, skip_channels)`.
template <typename Visit>
void walk(const NetworkSpec& spec, Visit&& visit) {
  std::vector<int> enc_channels;
  int c = spec.in_channels;
  for (std::size_t i = 0; i < spec.encoder.size(); ++i) {
    visit(spec.encoder[i], c, "encoder." + std::to_string(i));
    c = spec.encoder[i].filters;
    enc_channels.push_back(c);
  }
  for (std::size_t i = 0; i < spec.decoder.size(); ++i) {
    const auto& s = spec.decoder[i];
    visit(s, c, "decoder." + std::to_string(i));
    c = s.filters;
    if (s.kind == StageKind::Upscale)
      for (const auto& sk : spec.skips)
        if (sk.decoder_stage == static_cast<int>(i)) c += enc_channels[sk.encoder_stage];
  }
}

}  // namespace

std::vector<ParamDecl> enumerate_parameters(const NetworkSpec& spec) {
  spec.validate();
  std::vector<ParamDecl> out;
  walk(spec, [&](const StageSpec& s, int cin, const std::string& prefix) {
    auto block = block_parameters(s, cin, prefix);
    out.insert(out.end(), std::make_move_iterator(block.begin()), std::make_move_iterator(block.end()));
  });
  return out;
}

std::uint64_t count_parameters(const NetworkSpec& spec) {
  std::uint64_t total = 0;
  for (const auto& p : enumerate_parameters(spec))
    if (p.trainable()) total += shape_elements(p.shape);
  return total;
}

Weights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  const RngStream root(seed);
  Weights weights;
  std::uint64_t index = 0;
  for (const auto& p : enumerate_parameters(spec)) {
    Tensor t(p.shape);
    switch (p.role) {
      case ParamRole::ConvWeight: {
        // (C_out, C_in/g, K, K) for convs; transposed convs store (C_in, C_out, K, K)
        // and take fan-in from the output side.
        const std::size_t fan_in = p.shape[1] * p.shape[2] * p.shape[3];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        RngStream rng = root.derive(index);
        for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
        break;
      }
      case ParamRole::BnGamma:
      case ParamRole::BnVar:
        std::fill(t.values().begin(), t.values().end(), 1.0f);
        break;
      default:
        break;
    }
    weights.add(p.name, std::move(t));
    ++index;
  }
  return weights;
}

namespace {

void check_finite(const Tensor& t, const std::string& layer) {
  if (!t.all_finite()) throw NumericalError(layer);
}

BatchNormParams bn_params(const Weights& w, const std::string& p) {
  return {w.get(p + ".gamma").values(), w.get(p + ".beta").values(),
          w.get(p + ".running_mean").values(), w.get(p + ".running_var").values(), 1e-3f};
}

Tensor conv_bn(const Tensor& x, const Weights& w, const std::string& p, Conv2dOptions opt, bool act,
               int threads) {
  Tensor y = conv2d(x, w.get(p + ".conv.weight"), opt, {}, threads);
  batchnorm_infer_inplace(y, bn_params(w, p + ".bn"));
  if (act) swish_inplace(y);
  check_finite(y, p);
  return y;
}

Tensor mirse_block(const Tensor& x, const StageSpec& s, const Weights& w, const std::string& p, bool stride2,
                   int threads) {
  const int cin = static_cast<int>(x.channels());
  Tensor h = s.expand_ratio != 1 ? conv_bn(x, w, p + ".expand", {}, true, threads) : x;
  h = conv_bn(h, w, p + ".dw", {stride2 ? 2 : 1, 1, static_cast<int>(h.channels())}, true, threads);
  h = squeeze_excite(h, {&w.get(p + ".se.reduce.weight"), w.get(p + ".se.reduce.bias").values(),
                         &w.get(p + ".se.expand.weight"), w.get(p + ".se.expand.bias").values()});
  check_finite(h, p + ".se");
  Tensor y = conv_bn(h, w, p + ".project", {}, false, threads);
  if (!stride2 && cin == s.filters) {
    add_inplace(y, x);
    check_finite(y, p + ".residual");
  }
  return y;
}

}  // namespace

Tensor mirse_forward(const Tensor& input, const StageSpec& spec, const Weights& weights,
                     const std::string& prefix, int threads) {
  require_feature_map(input, "mirse_forward input");
  Tensor x = input;
  for (int r = 0; r < spec.repeats; ++r)
    x = mirse_block(x, spec, weights, rep_prefix(prefix, r), spec.stride2 && r == 0, threads);
  return x;
}

Tensor rms_forward(const Tensor& input, const StageSpec& spec, const Weights& weights,
                   const std::string& prefix, int threads) {
  require_feature_map(input, "rms_forward input");
  if (static_cast<int>(input.channels()) != spec.filters)
    throw TensorError("rms_forward: input has " + std::to_string(input.channels()) +
                      " channels, block expects " + std::to_string(spec.filters));
  Tensor cat;
  for (int b = 0; b < 4; ++b) {
    Tensor br = conv_bn(input, weights, prefix + ".branch" + std::to_string(b),
                        {1, spec.rms_dilations[b], 1}, true, threads);
    cat = b == 0 ? std::move(br) : concat_channels(cat, br);
  }
  Tensor y = conv_bn(cat, weights, prefix + ".fuse", {}, true, threads);
  add_inplace(y, input);
  check_finite(y, prefix + ".residual");
  return y;
}

EfficientUNet::EfficientUNet(NetworkSpec spec, std::shared_ptr<const Weights> weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  if (!weights_) throw std::invalid_argument("EfficientUNet: null weights");
  validate_weights(spec_, *weights_);
}

Tensor EfficientUNet::forward(const Tensor& input, int threads) const {
  require_feature_map(input, "network input");
  if (static_cast<int>(input.channels()) != spec_.in_channels)
    throw TensorError("network input must have " + std::to_string(spec_.in_channels) + " channels, got " +
                      std::to_string(input.channels()));
  if (input.height() == 0 || input.width() == 0 || input.height() % 32 != 0 || input.width() % 32 != 0)
    throw TensorError("network input height and width must be positive multiples of 32, got " +
                      shape_string(input.shape()));
  check_finite(input, "input");

  const Weights& w = *weights_;
  std::map<int, Tensor> keep;  // encoder outputs feeding skips
  for (const auto& sk : spec_.skips) keep.emplace(sk.encoder_stage, Tensor{});

  Tensor x = input;
  for (std::size_t i = 0; i < spec_.encoder.size(); ++i) {
    const auto& s = spec_.encoder[i];
    const std::string p = "encoder." + std::to_string(i);
    if (s.kind == StageKind::Stem)
      x = conv_bn(x, w, p, {s.stride2 ? 2 : 1, 1, 1}, true, threads);
    else if (s.kind == StageKind::MIRSE)
      x = mirse_forward(x, s, w, p, threads);
    else
      x = rms_forward(x, s, w, p, threads);
    if (auto it = keep.find(static_cast<int>(i)); it != keep.end()) it->second = x;
  }

  for (std::size_t i = 0; i < spec_.decoder.size(); ++i) {
    const auto& s = spec_.decoder[i];
    const std::string p = "decoder." + std::to_string(i);
    switch (s.kind) {
      case StageKind::Upscale: {
        x = transposed_conv2d(x, w.get(p + ".tconv.weight"), w.get(p + ".tconv.bias").values(), threads);
        check_finite(x, p + ".tconv");
        for (const auto& sk : spec_.skips)
          if (sk.decoder_stage == static_cast<int>(i)) x = concat_channels(x, keep.at(sk.encoder_stage));
        break;
      }
      case StageKind::MIRSE:
        x = mirse_forward(x, s, w, p, threads);
        break;
      case StageKind::RMS:
        x = rms_forward(x, s, w, p, threads);
        break;
      case StageKind::Head:
        x = conv2d(x, w.get(p + ".conv.weight"), {}, w.get(p + ".conv.bias").values(), threads);
        sigmoid_inplace(x);
        check_finite(x, p);
        break;
      case StageKind::Stem:
        break;
    }
  }
  return x;
}

Tensor network_forward(const NetworkSpec& spec, const Weights& weights, const Tensor& input, int threads) {
  validate_weights(spec, weights);
  // Non-owning view; the caller keeps `weights` alive for the call.
  const EfficientUNet net(spec, std::shared_ptr<const Weights>(&weights, [](const Weights*) {}));
  return net.forward(input, threads);
}

}  // namespace sqseg
