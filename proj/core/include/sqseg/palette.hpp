#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sqseg {

using Rgb8 = std::array<std::uint8_t, 3>;

struct ClassInfo {
  int id = 0;
  std::string name;
  Rgb8 color{};
  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

/// Class table; ids are 1..size() in order. Label 0 is background and
/// always rendered black.
class Palette {
 public:
  Palette() = default;
  /// Throws std::invalid_argument unless ids run 1..N without gaps, N <= 255.
  explicit Palette(std::vector<ClassInfo> classes);

  const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
  int num_classes() const noexcept { return static_cast<int>(classes_.size()); }
  bool valid_class(int id) const noexcept { return id >= 1 && id <= num_classes(); }
  const ClassInfo* find(int id) const noexcept;
  Rgb8 color(int label) const noexcept;

  friend bool operator==(const Palette&, const Palette&) = default;

 private:
  std::vector<ClassInfo> classes_;
};

/// tumour, stroma, inflammatory, necrosis, others.
Palette default_palette();

std::string color_hex(const Rgb8& c);
Rgb8 parse_color_hex(const std::string& s);

/// [{"id": 1, "name": "tumour", "color": "#rrggbb"}, ...]
void to_json(nlohmann::json& j, const Palette& p);
void from_json(const nlohmann::json& j, Palette& p);

Palette load_palette(const std::filesystem::path& path);

}  // namespace sqseg
