#include "sqseg/mask.hpp"

#include <algorithm>

namespace sqseg {

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("BinaryMask: width and height must be >= 1");
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("BinaryMask: width and height must be >= 1");
  if (bits_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("BinaryMask: bits length must equal width * height");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BinaryMask& BinaryMask::operator|=(const BinaryMask& other) {
  require_same_shape(*this, other, "mask union");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

BinaryMask& BinaryMask::operator&=(const BinaryMask& other) {
  require_same_shape(*this, other, "mask intersection");
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
  return *this;
}

BinaryMask& BinaryMask::subtract(const BinaryMask& other) {
  require_same_shape(*this, other, "mask difference");
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (other.bits_[i]) bits_[i] = 0;
  return *this;
}

bool BinaryMask::is_subset_of(const BinaryMask& other) const {
  require_same_shape(*this, other, "subset test");
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

BinaryMask operator|(BinaryMask lhs, const BinaryMask& rhs) { return lhs |= rhs; }
BinaryMask operator&(BinaryMask lhs, const BinaryMask& rhs) { return lhs &= rhs; }

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
}

BoundingBox bounding_box(const BinaryMask& mask) {
  BoundingBox box{mask.width(), mask.height(), 0, 0};
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
      }
  if (box.x1 == 0) return {};
  return box;
}

LabelMask::LabelMask(int width, int height, int num_classes)
    : width_(width), height_(height), num_classes_(num_classes) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("LabelMask: width and height must be >= 1");
  if (num_classes < 1 || num_classes > 255)
    throw std::invalid_argument("LabelMask: num_classes must be in [1, 255]");
  labels_.assign(static_cast<std::size_t>(width) * height, 0);
}

LabelMask::LabelMask(int width, int height, std::vector<std::uint8_t> labels,
                     int num_classes)
    : width_(width), height_(height), num_classes_(num_classes), labels_(std::move(labels)) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("LabelMask: width and height must be >= 1");
  if (num_classes < 1 || num_classes > 255)
    throw std::invalid_argument("LabelMask: num_classes must be in [1, 255]");
  if (labels_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("LabelMask: labels length must equal width * height");
  for (auto l : labels_)
    if (l > num_classes_)
      throw std::invalid_argument("LabelMask: label " + std::to_string(l) +
                                  " exceeds class count " + std::to_string(num_classes_));
}

void LabelMask::set(int x, int y, int label) {
  if (label < 0 || label > num_classes_)
    throw std::invalid_argument("LabelMask: label out of range");
  labels_[static_cast<std::size_t>(y) * width_ + x] = static_cast<std::uint8_t>(label);
}

BinaryMask LabelMask::class_mask(int class_id) const {
  std::vector<std::uint8_t> bits(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) bits[i] = labels_[i] == class_id;
  return BinaryMask(width_, height_, std::move(bits));
}

bool LabelMask::has_class(int class_id) const {
  return std::any_of(labels_.begin(), labels_.end(),
                     [&](std::uint8_t l) { return l == class_id; });
}

std::vector<int> LabelMask::present_classes() const {
  std::vector<bool> seen(256, false);
  for (auto l : labels_) seen[l] = true;
  std::vector<int> out;
  for (int c = 1; c < 256; ++c)
    if (seen[c]) out.push_back(c);
  return out;
}

}  // namespace sqseg
