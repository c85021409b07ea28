#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqseg/tensor.hpp"

namespace sqseg {

class Weights;

enum class StageKind { Stem, MIRSE, Upscale, RMS, Head };

const char* to_string(StageKind kind);

/// One row of the encoder/decoder table after scaling.
struct StageSpec {
  StageKind kind = StageKind::MIRSE;
  int kernel = 3;                  // Stem, MIRSE, Head
  std::vector<int> rms_kernels;    // RMS: four kernel sizes
  std::vector<int> rms_dilations;  // RMS: four dilation rates
  int filters = 1;                 // output channels
  int repeats = 1;                 // MIRSE
  bool stride2 = false;            // Stem and *-marked MIRSE stages
  int expand_ratio = 6;            // MIRSE
  double squeeze_ratio = 0.25;     // MIRSE

  void validate() const;
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct SkipLink {
  int encoder_stage = 0;  // index into NetworkSpec::encoder
  int decoder_stage = 0;  // index of an Upscale stage in NetworkSpec::decoder
  friend bool operator==(const SkipLink&, const SkipLink&) = default;
};

enum class Variant { B0, B1, B2, B3 };

struct ScalingFactors {
  double width = 1.0;
  double depth = 1.0;
};

ScalingFactors scaling_for(Variant v);
std::optional<Variant> parse_variant(const std::string& name);
const char* to_string(Variant v);

struct NetworkSpec {
  std::string name;
  std::vector<StageSpec> encoder;
  std::vector<StageSpec> decoder;
  std::vector<SkipLink> skips;
  double width_mult = 1.0;
  double depth_mult = 1.0;
  int in_channels = 5;  // RGB + inclusion + exclusion
  int out_channels = 1;

  /// Checks stage invariants and that the spatial bookkeeping closes: five
  /// stride-2 reductions, five upscales, skips landing on matching sizes.
  void validate() const;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);

/// Width rounding: nearest multiple of 8, at least 8, never below 90 % of
/// the scaled value.
int scale_filters(int filters, double width_mult);
/// Depth rounding: ceil(repeats * depth_mult).
int scale_repeats(int repeats, double depth_mult);

NetworkSpec build_efficient_unet(Variant variant);
NetworkSpec build_efficient_unet(double width_mult, double depth_mult);

enum class ParamRole { ConvWeight, Bias, BnGamma, BnBeta, BnMean, BnVar };

struct ParamDecl {
  std::string name;
  Shape shape;
  ParamRole role;
  bool trainable() const noexcept { return role != ParamRole::BnMean && role != ParamRole::BnVar; }
};

/// Every parameter of the built network in canonical order.
std::vector<ParamDecl> enumerate_parameters(const NetworkSpec& spec);

/// Trainable count: conv weights, biases, and BN gamma/beta.
std::uint64_t count_parameters(const NetworkSpec& spec);

/// Fan-in uniform +-sqrt(6 / fan_in) for conv weights, zero biases, and
/// identity BN (gamma 1, beta 0, mean 0, var 1). Deterministic in `seed`.
Weights init_weights(const NetworkSpec& spec, std::uint64_t seed);

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& layer)
      : std::runtime_error("non-finite value produced by layer " + layer), layer(layer) {}
  std::string layer;
};

/// Inference-only Efficient-UNet bound to an immutable weight set.
/// forward() is re-entrant; results are bit-identical for any thread count.
class EfficientUNet {
 public:
  /// Throws WeightsError when a declared parameter is missing, has the wrong
  /// shape, or when `weights` carries entries the network does not use.
  EfficientUNet(NetworkSpec spec, std::shared_ptr<const Weights> weights);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const Weights& weights() const noexcept { return *weights_; }

  /// input (in_channels, H, W) with H, W divisible by 32 -> (1, H, W) in (0, 1).
  Tensor forward(const Tensor& input, int threads = 1) const;

 private:
  NetworkSpec spec_;
  std::shared_ptr<const Weights> weights_;
};

Tensor network_forward(const NetworkSpec& spec, const Weights& weights, const Tensor& input,
                       int threads = 1);

// Block-level entry points, exposed for verification. `prefix` names the
// weight entries ("encoder.3" etc.).
Tensor mirse_forward(const Tensor& input, const StageSpec& spec, const Weights& weights,
                     const std::string& prefix, int threads = 1);
Tensor rms_forward(const Tensor& input, const StageSpec& spec, const Weights& weights,
                   const std::string& prefix, int threads = 1);

/// Parameters of a standalone block with `in_channels` inputs, named under
/// `prefix` exactly as inside a network.
std::vector<ParamDecl> block_parameters(const StageSpec& spec, int in_channels,
                                        const std::string& prefix);

}  // namespace sqseg
