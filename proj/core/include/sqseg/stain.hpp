#pragma once

#include <array>

#include <json.hpp>

#include "sqseg/tensor.hpp"

namespace sqseg {

/// Per-channel statistics in the l-alpha-beta opponent space.
struct StainStats {
  std::array<double, 3> mean{};
  std::array<double, 3> std{};
};

void to_json(nlohmann::json& j, const StainStats& s);
void from_json(const nlohmann::json& j, StainStats& s);

using Lab = std::array<double, 3>;

/// RGB in [0, 1] to l-alpha-beta (log10 LMS cone space, LMS floored at 1e-6).
Lab rgb_to_lab(double r, double g, double b) noexcept;
std::array<double, 3> lab_to_rgb(const Lab& lab) noexcept;

/// Population statistics of a (3, H, W) RGB image in [0, 1].
StainStats compute_stain_stats(const Tensor& rgb);

/// Per-channel mean/std transfer to `target`, then back to RGB clipped to
/// [0, 1]. A channel with zero source deviation is shifted but not scaled.
/// Throws std::invalid_argument when a target deviation is not positive.
Tensor reinhard_normalize(const Tensor& rgb, const StainStats& target);

}  // namespace sqseg
