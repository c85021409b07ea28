#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqseg {

/// Raised when two grids that must share dimensions do not.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Row-major boolean grid. Width and height are always >= 1.
class BinaryMask {
 public:
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  /// Out-of-canvas reads are background.
  bool get(int x, int y) const noexcept { return contains(x, y) && at(x, y); }
  void set(int x, int y, bool value = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }

  bool operator[](std::size_t index) const noexcept { return bits_[index] != 0; }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  BinaryMask& operator|=(const BinaryMask& other);
  BinaryMask& operator&=(const BinaryMask& other);
  /// Clears every pixel that is set in `other`.
  BinaryMask& subtract(const BinaryMask& other);

  bool is_subset_of(const BinaryMask& other) const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

BinaryMask operator|(BinaryMask lhs, const BinaryMask& rhs);
BinaryMask operator&(BinaryMask lhs, const BinaryMask& rhs);

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what);

struct BoundingBox {
  int x0 = 0;  // inclusive
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;
  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
};

/// Tight box around the foreground; empty box for an empty mask.
BoundingBox bounding_box(const BinaryMask& mask);

/// Per-pixel class ids, 0 = background / unassigned, 1..num_classes.
class LabelMask {
 public:
  static constexpr int kDefaultClasses = 5;

  LabelMask(int width, int height, int num_classes = kDefaultClasses);
  LabelMask(int width, int height, std::vector<std::uint8_t> labels,
            int num_classes = kDefaultClasses);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return labels_.size(); }

  int at(int x, int y) const noexcept {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  void set(int x, int y, int label);

  const std::vector<std::uint8_t>& labels() const noexcept { return labels_; }
  std::uint8_t operator[](std::size_t index) const noexcept { return labels_[index]; }

  BinaryMask class_mask(int class_id) const;
  bool has_class(int class_id) const;
  /// Sorted ids of the non-zero classes that occur at least once.
  std::vector<int> present_classes() const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  int width_;
  int height_;
  int num_classes_;
  std::vector<std::uint8_t> labels_;
};

}  // namespace sqseg
