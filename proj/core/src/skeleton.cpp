#include <algorithm>
#include <array>
#include <bit>
#include <cstdlib>

#include "sqseg/morphology.hpp"

namespace sqseg {
namespace {

// Neighbour bits, clockwise from north: N NE E SE S SW W NW.
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

bool bit(unsigned code, int k) { return (code >> k) & 1u; }

// Counts components among the eight neighbour positions whose membership is
// `value`, using 8-adjacency (eight=true) or 4-adjacency inside the 3x3 ring.
// With `touching_only`, only components containing a 4-neighbour of the
// center are counted.
int ring_components(unsigned code, bool value, bool eight, bool touching_only) {
  std::array<bool, 8> seen{};
  int count = 0;
  for (int s = 0; s < 8; ++s) {
    if (bit(code, s) != value || seen[s]) continue;
    bool touches = false;
    std::array<int, 8> stack{};
    int top = 0;
    stack[top++] = s;
    seen[s] = true;
    while (top) {
      const int a = stack[--top];
      if (a % 2 == 0) touches = true;
      for (int b = 0; b < 8; ++b) {
        if (seen[b] || bit(code, b) != value) continue;
        const int ddx = kDx[a] - kDx[b], ddy = kDy[a] - kDy[b];
        const int cheb = std::max(std::abs(ddx), std::abs(ddy));
        const int manh = std::abs(ddx) + std::abs(ddy);
        if (eight ? cheb == 1 : manh == 1) {
          seen[b] = true;
          stack[top++] = b;
        }
      }
    }
    if (touches || !touching_only) ++count;
  }
  return count;
}

// Deleting a simple pixel preserves both foreground (8-connected) and
// background (4-connected) topology.
const std::array<bool, 256>& simple_table() {
  static const std::array<bool, 256> table = [] {
    std::array<bool, 256> t{};
    for (unsigned code = 0; code < 256; ++code)
      t[code] = ring_components(code, true, true, false) == 1 &&
                ring_components(code, false, false, true) == 1;
    return t;
  }();
  return table;
}

unsigned neighbourhood(const BinaryMask& m, int x, int y) {
  unsigned code = 0;
  for (int k = 0; k < 8; ++k)
    if (m.get(x + kDx[k], y + kDy[k])) code |= 1u << k;
  return code;
}

// Zhang-Suen candidate test on a neighbourhood code.
bool zs_candidate(unsigned code, int pass) {
  const int b = std::popcount(code);
  if (b < 2 || b > 6) return false;
  int transitions = 0;
  for (int k = 0; k < 8; ++k)
    if (!bit(code, k) && bit(code, (k + 1) % 8)) ++transitions;
  if (transitions != 1) return false;
  const bool n = bit(code, 0), e = bit(code, 2), s = bit(code, 4), w = bit(code, 6);
  if (pass == 0) return !(n && e && s) && !(e && s && w);
  return !(n && e && w) && !(n && s && w);
}

}  // namespace

BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask cur = mask;
  const auto& simple = simple_table();
  const auto box = bounding_box(mask);
  if (box.empty()) return cur;

  std::vector<PixelCoord> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      // Candidates come from the state at the start of the sub-iteration ...
      marked.clear();
      for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
          if (cur.at(x, y) && zs_candidate(neighbourhood(cur, x, y), pass))
            marked.push_back({x, y});
      // ... and are removed one at a time only while still simple, which
      // keeps every component (including 2x2 blocks) alive.
      for (const auto& p : marked)
        if (simple[neighbourhood(cur, p.x, p.y)]) {
          cur.set(p.x, p.y, false);
          changed = true;
        }
    }
  }

  // Rare junction blobs can leave a pixel with a full 3x3 neighbourhood; its
  // ring of neighbours stays connected without it.
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x)
      if (cur.at(x, y) && neighbourhood(cur, x, y) == 0xFFu) cur.set(x, y, false);
  return cur;
}

}  // namespace sqseg
