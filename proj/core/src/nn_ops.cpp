#include "sqseg/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace sqseg {

namespace {

constexpr std::size_t kPointwiseTile = 2048;

void pointwise_conv(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
                    Tensor& out, int threads) {
  const std::size_t cin = input.channels(), cout = kernel.dim(0), n = input.plane();
  const std::size_t tiles = (n + kPointwiseTile - 1) / kPointwiseTile;
  const float* in = input.data();
  const float* w = kernel.data();
  float* dst = out.data();
  parallel_for(tiles, threads, [&](std::size_t t0, std::size_t t1) {
    for (std::size_t t = t0; t < t1; ++t) {
      const std::size_t begin = t * kPointwiseTile;
      const std::size_t len = std::min(kPointwiseTile, n - begin);
      for (std::size_t co = 0; co < cout; ++co) {
        float* acc = dst + co * n + begin;
        std::fill(acc, acc + len, 0.0f);
        const float* wrow = w + co * cin;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const float wv = wrow[ci];
          const float* src = in + ci * n + begin;
          for (std::size_t i = 0; i < len; ++i) acc[i] += wv * src[i];
        }
        if (!bias.empty()) {
          const float b = bias[co];
          for (std::size_t i = 0; i < len; ++i) acc[i] += b;
        }
      }
    }
  });
}

// First and one-past-last output index whose input tap stays in [0, extent).
std::pair<long, long> valid_outputs(long out_extent, long in_extent, long stride, long offset) {
  // input index = o * stride + offset
  long lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  long hi = (in_extent - 1 - offset) >= 0 ? (in_extent - 1 - offset) / stride + 1 : 0;
  return {std::clamp(lo, 0L, out_extent), std::clamp(hi, 0L, out_extent)};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Conv2dOptions& options,
              std::span<const float> bias, int threads) {
  require_feature_map(input, "conv2d input");
  if (kernel.rank() != 4)
    throw TensorError("conv2d: kernel must be (C_out, C_in/groups, K, K), got " +
                      shape_string(kernel.shape()));
  const long k = static_cast<long>(kernel.dim(2));
  if (kernel.dim(3) != kernel.dim(2) || k % 2 == 0)
    throw TensorError("conv2d: kernel must be square with odd size, got " + shape_string(kernel.shape()));
  if (options.stride < 1 || options.dilation < 1 || options.groups < 1)
    throw TensorError("conv2d: stride, dilation and groups must be >= 1");
  const std::size_t cin = input.channels(), cout = kernel.dim(0);
  const std::size_t groups = static_cast<std::size_t>(options.groups);
  if (cin % groups != 0 || cout % groups != 0)
    throw TensorError("conv2d: channels (" + std::to_string(cin) + " in, " + std::to_string(cout) +
                      " out) not divisible by groups " + std::to_string(groups));
  if (kernel.dim(1) != cin / groups)
    throw TensorError("conv2d: kernel " + shape_string(kernel.shape()) + " does not match " +
                      std::to_string(cin) + " input channels with groups=" + std::to_string(groups));
  if (!bias.empty() && bias.size() != cout)
    throw TensorError("conv2d: bias length " + std::to_string(bias.size()) + " != " + std::to_string(cout));

  const long h = static_cast<long>(input.height()), w = static_cast<long>(input.width());
  const long stride = options.stride, dil = options.dilation;
  const long pad = dil * (k - 1) / 2;
  const long eff = k + (k - 1) * (dil - 1);
  const long hout = (h + 2 * pad - eff) / stride + 1;
  const long wout = (w + 2 * pad - eff) / stride + 1;
  Tensor out({cout, static_cast<std::size_t>(hout), static_cast<std::size_t>(wout)});

  if (k == 1 && groups == 1 && stride == 1) {
    pointwise_conv(input, kernel, bias, out, threads);
    return out;
  }

  const std::size_t cin_g = cin / groups, cout_g = cout / groups;
  const float* in = input.data();
  const float* kw = kernel.data();
  float* dst = out.data();
  const std::size_t in_plane = input.plane(), out_plane = out.plane();

  parallel_for(cout, threads, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t co = c0; co < c1; ++co) {
      float* o = dst + co * out_plane;
      std::fill(o, o + out_plane, 0.0f);
      const std::size_t g = co / cout_g;
      for (std::size_t cl = 0; cl < cin_g; ++cl) {
        const float* src = in + (g * cin_g + cl) * in_plane;
        const float* taps = kw + (co * cin_g + cl) * static_cast<std::size_t>(k * k);
        for (long ky = 0; ky < k; ++ky) {
          const auto [oy0, oy1] = valid_outputs(hout, h, stride, ky * dil - pad);
          for (long kx = 0; kx < k; ++kx) {
            const float wv = taps[ky * k + kx];
            const long xoff = kx * dil - pad;
            const auto [ox0, ox1] = valid_outputs(wout, w, stride, xoff);
            for (long oy = oy0; oy < oy1; ++oy) {
              const float* srow = src + (oy * stride + ky * dil - pad) * w;
              float* orow = o + oy * wout;
              if (stride == 1) {
                const float* s = srow + xoff;
                for (long ox = ox0; ox < ox1; ++ox) orow[ox] += wv * s[ox];
              } else {
                for (long ox = ox0; ox < ox1; ++ox) orow[ox] += wv * srow[ox * stride + xoff];
              }
            }
          }
        }
      }
      if (!bias.empty())
        for (std::size_t i = 0; i < out_plane; ++i) o[i] += bias[co];
    }
  });
  return out;
}

Tensor transposed_conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
                         int threads) {
  require_feature_map(input, "transposed_conv2d input");
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0)
    throw TensorError("transposed_conv2d: kernel must be (C_in, C_out, K, K) with odd K, got " +
                      shape_string(kernel.shape()));
  if (kernel.dim(0) != input.channels())
    throw TensorError("transposed_conv2d: kernel " + shape_string(kernel.shape()) + " expects " +
                      std::to_string(kernel.dim(0)) + " input channels, got " +
                      std::to_string(input.channels()));
  const std::size_t cin = input.channels(), cout = kernel.dim(1);
  if (!bias.empty() && bias.size() != cout)
    throw TensorError("transposed_conv2d: bias length mismatch");
  const long k = static_cast<long>(kernel.dim(2));
  const long pad = (k - 1) / 2;
  const long h = static_cast<long>(input.height()), w = static_cast<long>(input.width());
  const long hout = 2 * h, wout = 2 * w;
  Tensor out({cout, static_cast<std::size_t>(hout), static_cast<std::size_t>(wout)});
  const float* in = input.data();
  const float* kw = kernel.data();
  float* dst = out.data();
  const std::size_t in_plane = input.plane(), out_plane = out.plane();

  parallel_for(cout, threads, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t co = c0; co < c1; ++co) {
      float* o = dst + co * out_plane;
      std::fill(o, o + out_plane, 0.0f);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const float* src = in + ci * in_plane;
        const float* taps = kw + (ci * cout + co) * static_cast<std::size_t>(k * k);
        for (long ky = 0; ky < k; ++ky)
          for (long kx = 0; kx < k; ++kx) {
            const float wv = taps[ky * k + kx];
            for (long iy = 0; iy < h; ++iy) {
              const long oy = 2 * iy - pad + ky;
              if (oy < 0 || oy >= hout) continue;
              float* orow = o + oy * wout;
              const float* srow = src + iy * w;
              for (long ix = 0; ix < w; ++ix) {
                const long ox = 2 * ix - pad + kx;
                if (ox >= 0 && ox < wout) orow[ox] += wv * srow[ix];
              }
            }
          }
      }
      if (!bias.empty())
        for (std::size_t i = 0; i < out_plane; ++i) o[i] += bias[co];
    }
  });
  return out;
}

void batchnorm_infer_inplace(Tensor& t, const BatchNormParams& bn) {
  require_feature_map(t, "batchnorm input");
  const std::size_t c = t.channels();
  if (bn.gamma.size() != c || bn.beta.size() != c || bn.running_mean.size() != c ||
      bn.running_var.size() != c)
    throw TensorError("batchnorm: parameter lengths must equal channel count " + std::to_string(c));
  for (std::size_t ch = 0; ch < c; ++ch)
    if (bn.running_var[ch] < 0.0f) throw TensorError("batchnorm: negative running variance");
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float inv = 1.0f / std::sqrt(bn.running_var[ch] + bn.eps);
    const float g = bn.gamma[ch], b = bn.beta[ch], m = bn.running_mean[ch];
    for (float& v : t.channel(ch)) v = g * (v - m) * inv + b;
  }
}

Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& bn) {
  Tensor out = input;
  batchnorm_infer_inplace(out, bn);
  return out;
}

float sigmoid(float x) noexcept {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

float swish(float x) noexcept { return x * sigmoid(x); }

void sigmoid_inplace(Tensor& t) noexcept {
  for (float& v : t.values()) v = sigmoid(v);
}

void swish_inplace(Tensor& t) noexcept {
  for (float& v : t.values()) v = swish(v);
}

Tensor sigmoid(const Tensor& t) {
  Tensor out = t;
  sigmoid_inplace(out);
  return out;
}

Tensor swish(const Tensor& t) {
  Tensor out = t;
  swish_inplace(out);
  return out;
}

std::vector<float> global_average_pool(const Tensor& t) {
  require_feature_map(t, "global_average_pool input");
  std::vector<float> out(t.channels());
  for (std::size_t c = 0; c < t.channels(); ++c) {
    double acc = 0.0;
    for (float v : t.channel(c)) acc += v;
    out[c] = static_cast<float>(acc / static_cast<double>(t.plane()));
  }
  return out;
}

Tensor squeeze_excite(const Tensor& input, const SqueezeExciteParams& se) {
  require_feature_map(input, "squeeze_excite input");
  const std::size_t c = input.channels();
  const Tensor& rw = *se.reduce_weight;
  const Tensor& ew = *se.expand_weight;
  if (rw.rank() != 4 || rw.dim(1) != c || rw.dim(2) != 1 || rw.dim(3) != 1)
    throw TensorError("squeeze_excite: reduce weight " + shape_string(rw.shape()) +
                      " does not match " + std::to_string(c) + " channels");
  const std::size_t r = rw.dim(0);
  if (r < 1) throw TensorError("squeeze_excite: reduce_channels must be >= 1");
  if (ew.rank() != 4 || ew.dim(0) != c || ew.dim(1) != r || ew.dim(2) != 1 || ew.dim(3) != 1)
    throw TensorError("squeeze_excite: expand weight " + shape_string(ew.shape()) + " mismatch");
  if (se.reduce_bias.size() != r || se.expand_bias.size() != c)
    throw TensorError("squeeze_excite: bias length mismatch");

  const auto pooled = global_average_pool(input);
  std::vector<float> hidden(r);
  for (std::size_t j = 0; j < r; ++j) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < c; ++i) acc += rw[j * c + i] * pooled[i];
    hidden[j] = swish(acc + se.reduce_bias[j]);
  }
  Tensor out = input;
  for (std::size_t i = 0; i < c; ++i) {
    float acc = 0.0f;
    for (std::size_t j = 0; j < r; ++j) acc += ew[i * r + j] * hidden[j];
    const float gate = sigmoid(acc + se.expand_bias[i]);
    for (float& v : out.channel(i)) v *= gate;
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_feature_map(a, "concat_channels");
  require_feature_map(b, "concat_channels");
  if (a.height() != b.height() || a.width() != b.width())
    throw TensorError("concat_channels: spatial mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  std::vector<float> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.storage().begin(), a.storage().end());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return Tensor({a.channels() + b.channels(), a.height(), a.width()}, std::move(data));
}

void add_inplace(Tensor& target, const Tensor& other) {
  if (target.shape() != other.shape())
    throw TensorError("add: shape mismatch " + shape_string(target.shape()) + " vs " +
                      shape_string(other.shape()));
  for (std::size_t i = 0; i < target.size(); ++i) target[i] += other[i];
}

}  // namespace sqseg
