#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "sqseg/mask.hpp"

namespace sqseg {

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentLabels {
  int width = 0;
  int height = 0;
  int count = 0;                  // ids run 1..count, 0 is background
  std::vector<std::int32_t> ids;  // row-major

  std::int32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }
  BinaryMask component(int id) const;
};

/// Ids are assigned in raster order of each component's first pixel.
ComponentLabels connected_components(const BinaryMask& mask,
                                     Connectivity connectivity = Connectivity::Eight);

/// Splits a mask into one mask per component (same canvas size).
std::vector<BinaryMask> split_components(const BinaryMask& mask,
                                         Connectivity connectivity = Connectivity::Eight);

struct GaussianFilter {
  int kernel = 3;  // odd, >= 3
  double sigma = 1.0;
};
struct MedianFilter {
  int kernel = 3;  // odd, >= 3
};
using SmoothingFilter = std::variant<GaussianFilter, MedianFilter>;

/// Filters the mask as a 0/1 image with reflect padding and re-binarizes at 0.5.
BinaryMask smooth_mask(const BinaryMask& mask, const SmoothingFilter& filter);

/// Euclidean distance from each foreground pixel to the nearest background
/// pixel. The canvas is surrounded by one implicit ring of background.
class DistanceMap {
 public:
  DistanceMap(int width, int height, std::vector<double> values);
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double at(int x, int y) const noexcept { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

DistanceMap distance_transform(const BinaryMask& mask);

/// Raster-first pixel holding the largest distance value inside `region`.
PixelCoord distance_argmax(const DistanceMap& dist, const BinaryMask& region);

/// Per 8-connected component, keeps pixels whose distance is at least
/// `fraction` times that component's maximum distance.
BinaryMask threshold_distance_component(const BinaryMask& mask, double fraction);

/// Cuts the foreground bounding box into an equally spaced grid. An axis is
/// split only when its extent exceeds `cell_size`, into ceil(extent/cell_size)
/// bands. Returns the non-empty pieces in row-major grid order.
std::vector<BinaryMask> partition_component(const BinaryMask& component, int cell_size);

/// Topology-preserving iterative thinning to a one-pixel-wide skeleton.
BinaryMask skeletonize(const BinaryMask& mask);

}  // namespace sqseg
