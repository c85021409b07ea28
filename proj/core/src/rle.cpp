#include "sqseg/rle.hpp"

#include <stdexcept>
#include <string>

namespace sqseg {

std::vector<std::uint32_t> encode_rle(const LabelMask& labels) {
  std::vector<std::uint32_t> runs;
  const auto& v = labels.labels();
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    runs.push_back(v[i]);
    runs.push_back(static_cast<std::uint32_t>(j - i));
    i = j;
  }
  return runs;
}

LabelMask decode_rle(const std::vector<std::uint32_t>& runs, int width, int height, int num_classes) {
  if (width < 1 || height < 1) throw std::invalid_argument("rle: dimensions must be positive");
  if (runs.size() % 2 != 0) throw std::invalid_argument("rle: odd number of values");
  const std::size_t total = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> out;
  out.reserve(total);
  for (std::size_t i = 0; i < runs.size(); i += 2) {
    const std::uint32_t label = runs[i], count = runs[i + 1];
    if (label > static_cast<std::uint32_t>(num_classes))
      throw std::invalid_argument("rle: label " + std::to_string(label) + " out of range");
    if (count == 0) throw std::invalid_argument("rle: zero-length run");
    if (count > total - out.size()) throw std::invalid_argument("rle: runs exceed width * height");
    out.insert(out.end(), count, static_cast<std::uint8_t>(label));
  }
  if (out.size() != total)
    throw std::invalid_argument("rle: runs cover " + std::to_string(out.size()) + " of " +
                                std::to_string(total) + " pixels");
  return LabelMask(width, height, std::move(out), num_classes);
}

nlohmann::json rle_to_json(const LabelMask& labels) {
  return {{"width", labels.width()}, {"height", labels.height()}, {"runs", encode_rle(labels)}};
}

LabelMask rle_from_json(const nlohmann::json& j, int num_classes) {
  return decode_rle(j.at("runs").get<std::vector<std::uint32_t>>(), j.at("width").get<int>(),
                    j.at("height").get<int>(), num_classes);
}

}  // namespace sqseg
