#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sqseg {

class TensorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_elements(const Shape& shape);

/// Dense row-major float32 array. Feature maps are (channels, height, width).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  // Shorthands for rank-3 feature maps.
  std::size_t channels() const { return dim(rank() - 3); }
  std::size_t height() const { return dim(rank() - 2); }
  std::size_t width() const { return dim(rank() - 1); }
  std::size_t plane() const { return height() * width(); }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height() + y) * width() + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height() + y) * width() + x];
  }

  std::span<float> channel(std::size_t c) { return {data_.data() + c * plane(), plane()}; }
  std::span<const float> channel(std::size_t c) const {
    return {data_.data() + c * plane(), plane()};
  }

  /// Same data, new shape with an equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Throws TensorError unless `t` is rank 3.
void require_feature_map(const Tensor& t, const char* what);

/// Splits [0, count) into `threads` contiguous chunks and runs them on
/// separate threads. Work items must be independent; results then do not
/// depend on the thread count.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

/// Hardware concurrency, at least 1.
int default_thread_count();

}  // namespace sqseg
