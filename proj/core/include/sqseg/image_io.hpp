#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "sqseg/mask.hpp"
#include "sqseg/palette.hpp"
#include "sqseg/tensor.hpp"

namespace sqseg {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Any PNG colour type to a (3, H, W) tensor in [0, 1]; alpha is dropped.
Tensor decode_rgb_png(const std::string& bytes);
Tensor read_rgb_png(const std::filesystem::path& path);

/// 8-bit RGB, values rounded from [0, 1].
std::string encode_rgb_png(const Tensor& rgb);

/// Label PNGs are 8-bit grayscale or palette-indexed; the stored sample is
/// the class id. Throws ImageError for other formats or ids above
/// num_classes.
LabelMask decode_label_png(const std::string& bytes, int num_classes = LabelMask::kDefaultClasses);
LabelMask read_label_png(const std::filesystem::path& path, int num_classes = LabelMask::kDefaultClasses);

/// Palette-indexed PNG, index = class id, colours from `palette`.
std::string encode_label_png(const LabelMask& labels, const Palette& palette);

/// 8-bit grayscale, 0 / 255.
std::string encode_mask_png(const BinaryMask& mask);
/// Any grayscale PNG; non-zero samples are foreground.
BinaryMask decode_mask_png(const std::string& bytes);

}  // namespace sqseg
