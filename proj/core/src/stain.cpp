#include "sqseg/stain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sqseg {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToLms{{{0.3811, 0.5783, 0.0402}, {0.1967, 0.7244, 0.0782}, {0.0241, 0.1288, 0.8444}}};
constexpr double kLmsFloor = 1e-6;

Mat3 inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, d = (i + 2) % 3;
      r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
    }
  return r;
}

const Mat3& lms_to_rgb() {
  static const Mat3 inv = inverse(kRgbToLms);
  return inv;
}

void require_rgb(const Tensor& rgb, const char* what) {
  require_feature_map(rgb, what);
  if (rgb.channels() != 3) throw TensorError(std::string(what) + ": expected 3 channels");
  if (rgb.plane() == 0) throw TensorError(std::string(what) + ": empty image");
}

}  // namespace

void to_json(nlohmann::json& j, const StainStats& s) { j = nlohmann::json{{"mean", s.mean}, {"std", s.std}}; }

void from_json(const nlohmann::json& j, StainStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std);
}

Lab rgb_to_lab(double r, double g, double b) noexcept {
  std::array<double, 3> lms{};
  for (int i = 0; i < 3; ++i)
    lms[i] = std::log10(std::max(kRgbToLms[i][0] * r + kRgbToLms[i][1] * g + kRgbToLms[i][2] * b, kLmsFloor));
  const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0), s2 = std::sqrt(2.0);
  return {(lms[0] + lms[1] + lms[2]) / s3, (lms[0] + lms[1] - 2.0 * lms[2]) / s6, (lms[0] - lms[1]) / s2};
}

std::array<double, 3> lab_to_rgb(const Lab& lab) noexcept {
  const double a = lab[0] / std::sqrt(3.0), b = lab[1] / std::sqrt(6.0), c = lab[2] / std::sqrt(2.0);
  const std::array<double, 3> lms{std::pow(10.0, a + b + c), std::pow(10.0, a + b - c), std::pow(10.0, a - 2.0 * b)};
  const Mat3& m = lms_to_rgb();
  std::array<double, 3> rgb{};
  for (int i = 0; i < 3; ++i) rgb[i] = m[i][0] * lms[0] + m[i][1] * lms[1] + m[i][2] * lms[2];
  return rgb;
}

StainStats compute_stain_stats(const Tensor& rgb) {
  require_rgb(rgb, "compute_stain_stats");
  const std::size_t n = rgb.plane();
  std::array<double, 3> sum{}, sq{};
  std::vector<Lab> lab(n);
  for (std::size_t i = 0; i < n; ++i) {
    lab[i] = rgb_to_lab(rgb.channel(0)[i], rgb.channel(1)[i], rgb.channel(2)[i]);
    for (int c = 0; c < 3; ++c) sum[c] += lab[i][c];
  }
  StainStats s;
  for (int c = 0; c < 3; ++c) s.mean[c] = sum[c] / static_cast<double>(n);
  for (const auto& v : lab)
    for (int c = 0; c < 3; ++c) sq[c] += (v[c] - s.mean[c]) * (v[c] - s.mean[c]);
  for (int c = 0; c < 3; ++c) s.std[c] = std::sqrt(sq[c] / static_cast<double>(n));
  return s;
}

Tensor reinhard_normalize(const Tensor& rgb, const StainStats& target) {
  require_rgb(rgb, "reinhard_normalize");
  for (int c = 0; c < 3; ++c)
    if (!(target.std[c] > 0.0)) throw std::invalid_argument("reinhard_normalize: target std must be > 0");
  const StainStats src = compute_stain_stats(rgb);
  std::array<double, 3> scale{};
  for (int c = 0; c < 3; ++c) scale[c] = src.std[c] > 1e-12 ? target.std[c] / src.std[c] : 1.0;

  Tensor out(rgb.shape());
  const std::size_t n = rgb.plane();
  for (std::size_t i = 0; i < n; ++i) {
    Lab lab = rgb_to_lab(rgb.channel(0)[i], rgb.channel(1)[i], rgb.channel(2)[i]);
    for (int c = 0; c < 3; ++c) lab[c] = (lab[c] - src.mean[c]) * scale[c] + target.mean[c];
    const auto back = lab_to_rgb(lab);
    for (int c = 0; c < 3; ++c) out.channel(c)[i] = static_cast<float>(std::clamp(back[c], 0.0, 1.0));
  }
  return out;
}

}  // namespace sqseg
