#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sqseg/mask.hpp"

namespace sqseg {

/// Row-major runs flattened as [label, count, label, count, ...]. Adjacent
/// runs always differ in label and every count is positive.
std::vector<std::uint32_t> encode_rle(const LabelMask& labels);

/// Throws std::invalid_argument unless the runs cover exactly width * height
/// pixels with labels in [0, num_classes].
LabelMask decode_rle(const std::vector<std::uint32_t>& runs, int width, int height,
                     int num_classes = LabelMask::kDefaultClasses);

/// {"width", "height", "runs"}.
nlohmann::json rle_to_json(const LabelMask& labels);
LabelMask rle_from_json(const nlohmann::json& j, int num_classes = LabelMask::kDefaultClasses);

}  // namespace sqseg
