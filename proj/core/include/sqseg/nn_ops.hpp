#pragma once

#include <span>

#include "sqseg/tensor.hpp"

namespace sqseg {

struct Conv2dOptions {
  int stride = 1;
  int dilation = 1;
  int groups = 1;
};

/// Cross-correlation with symmetric zero padding dilation*(K-1)/2, so the
/// output is ceil(input / stride) in each spatial dim.
/// kernel: (C_out, C_in / groups, K, K), K odd. `bias` is empty or C_out long.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options = {},
              std::span<const float> bias = {}, int threads = 1);

/// Transposed convolution, stride 2, padding 1, output padding 1: the adjoint
/// of conv2d with stride 2 and the same (C_in, C_out, 3, 3) kernel read as
/// (C_out_conv, C_in_conv). Output is exactly twice the input size.
Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias = {},
                         int threads = 1);

struct BatchNormParams {
  std::span<const float> gamma;
  std::span<const float> beta;
  std::span<const float> running_mean;
  std::span<const float> running_var;
  float eps = 1e-3f;
};

/// y = gamma * (x - mean) / sqrt(var + eps) + beta per channel.
Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& bn);
void batchnorm_infer_inplace(Tensor& t, const BatchNormParams& bn);

float sigmoid(float x) noexcept;
float swish(float x) noexcept;
Tensor sigmoid(const Tensor& t);
Tensor swish(const Tensor& t);
void sigmoid_inplace(Tensor& t) noexcept;
void swish_inplace(Tensor& t) noexcept;

/// Per-channel mean over the spatial dims.
std::vector<float> global_average_pool(const Tensor& t);

struct SqueezeExciteParams {
  const Tensor* reduce_weight;  // (R, C, 1, 1)
  std::span<const float> reduce_bias;
  const Tensor* expand_weight;  // (C, R, 1, 1)
  std::span<const float> expand_bias;
};

/// pool -> 1x1 conv to R -> swish -> 1x1 conv to C -> sigmoid -> channel scale.
Tensor squeeze_excite(const Tensor& input, const SqueezeExciteParams& se);

/// Stacks feature maps of equal spatial size along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

void add_inplace(Tensor& target, const Tensor& other);

}  // namespace sqseg
