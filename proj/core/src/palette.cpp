#include "sqseg/palette.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace sqseg {

Palette::Palette(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
  if (classes_.size() > 255) throw std::invalid_argument("palette: at most 255 classes");
  for (std::size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i].id != static_cast<int>(i) + 1)
      throw std::invalid_argument("palette: class ids must run 1..N in order (entry " + std::to_string(i) +
                                  " has id " + std::to_string(classes_[i].id) + ")");
}

const ClassInfo* Palette::find(int id) const noexcept {
  return valid_class(id) ? &classes_[static_cast<std::size_t>(id) - 1] : nullptr;
}

Rgb8 Palette::color(int label) const noexcept {
  const ClassInfo* c = find(label);
  return c ? c->color : Rgb8{0, 0, 0};
}

Palette default_palette() {
  return Palette({{1, "tumour", {220, 40, 40}},
                  {2, "stroma", {240, 160, 200}},
                  {3, "inflammatory", {60, 80, 220}},
                  {4, "necrosis", {250, 220, 60}},
                  {5, "others", {60, 180, 90}}});
}

std::string color_hex(const Rgb8& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

Rgb8 parse_color_hex(const std::string& s) {
  if (s.size() != 7 || s[0] != '#') throw std::invalid_argument("bad color '" + s + "', expected #rrggbb");
  Rgb8 c{};
  for (int i = 0; i < 3; ++i) {
    std::size_t used = 0;
    const std::string part = s.substr(1 + 2 * i, 2);
    int v = 0;
    try {
      v = std::stoi(part, &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != 2) throw std::invalid_argument("bad color '" + s + "', expected #rrggbb");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

void to_json(nlohmann::json& j, const Palette& p) {
  j = nlohmann::json::array();
  for (const auto& c : p.classes()) j.push_back({{"id", c.id}, {"name", c.name}, {"color", color_hex(c.color)}});
}

void from_json(const nlohmann::json& j, Palette& p) {
  std::vector<ClassInfo> classes;
  for (const auto& e : j)
    classes.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                       parse_color_hex(e.at("color").get<std::string>())});
  p = Palette(std::move(classes));
}

Palette load_palette(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open palette " + path.string());
  return nlohmann::json::parse(in).get<Palette>();
}

}  // namespace sqseg
