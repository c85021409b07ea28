#include "sqseg/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sqseg {

BinaryMask ComponentLabels::component(int id) const {
  std::vector<std::uint8_t> bits(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) bits[i] = ids[i] == id;
  return BinaryMask(width, height, std::move(bits));
}

ComponentLabels connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels out{w, h, 0, std::vector<std::int32_t>(mask.size(), 0)};
  const bool eight = connectivity == Connectivity::Eight;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!mask[i] || out.ids[i] != 0) continue;
      const std::int32_t id = ++out.count;
      out.ids[i] = id;
      stack.assign(1, static_cast<int>(i));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int px = p % w, py = p / w;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
            const int nx = px + dx, ny = py + dy;
            if (!mask.get(nx, ny)) continue;
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (out.ids[j] != 0) continue;
            out.ids[j] = id;
            stack.push_back(static_cast<int>(j));
          }
      }
    }
  }
  return out;
}

std::vector<BinaryMask> split_components(const BinaryMask& mask, Connectivity connectivity) {
  const auto labels = connected_components(mask, connectivity);
  std::vector<BinaryMask> parts(labels.count, BinaryMask(mask.width(), mask.height()));
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (const int id = labels.at(x, y); id > 0) parts[id - 1].set(x, y);
  return parts;
}

namespace {

// Symmetric reflection (edge sample repeated), valid for any offset.
int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

void check_kernel(int kernel) {
  if (kernel < 3 || kernel % 2 == 0)
    throw std::invalid_argument("smooth_mask: kernel must be odd and >= 3");
}

BinaryMask gaussian_smooth(const BinaryMask& mask, const GaussianFilter& f) {
  check_kernel(f.kernel);
  if (!(f.sigma > 0.0)) throw std::invalid_argument("smooth_mask: sigma must be > 0");
  const int r = f.kernel / 2;
  std::vector<double> taps(f.kernel);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-(i * i) / (2.0 * f.sigma * f.sigma));
    total += taps[i + r];
  }
  for (auto& t : taps) t /= total;

  const int w = mask.width(), h = mask.height();
  std::vector<double> horiz(mask.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += taps[k + r] * (mask.at(reflect(x + k, w), y) ? 1.0 : 0.0);
      horiz[static_cast<std::size_t>(y) * w + x] = acc;
    }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k)
        acc += taps[k + r] * horiz[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
      if (acc >= 0.5) out.set(x, y);
    }
  return out;
}

BinaryMask median_smooth(const BinaryMask& mask, const MedianFilter& f) {
  check_kernel(f.kernel);
  const int r = f.kernel / 2;
  const int w = mask.width(), h = mask.height();
  const int pw = w + 2 * r, ph = h + 2 * r;
  // Integral image over the reflect-padded canvas.
  std::vector<int> sat(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
  for (int y = 0; y < ph; ++y) {
    int row = 0;
    for (int x = 0; x < pw; ++x) {
      row += mask.at(reflect(x - r, w), reflect(y - r, h)) ? 1 : 0;
      sat[static_cast<std::size_t>(y + 1) * (pw + 1) + x + 1] =
          sat[static_cast<std::size_t>(y) * (pw + 1) + x + 1] + row;
    }
  }
  const int majority = f.kernel * f.kernel / 2;
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto s = [&](int xx, int yy) { return sat[static_cast<std::size_t>(yy) * (pw + 1) + xx]; };
      const int ones = s(x + f.kernel, y + f.kernel) - s(x, y + f.kernel) - s(x + f.kernel, y) + s(x, y);
      if (ones > majority) out.set(x, y);
    }
  return out;
}

}  // namespace

BinaryMask smooth_mask(const BinaryMask& mask, const SmoothingFilter& filter) {
  return std::visit(
      [&](const auto& f) -> BinaryMask {
        if constexpr (std::is_same_v<std::decay_t<decltype(f)>, GaussianFilter>)
          return gaussian_smooth(mask, f);
        else
          return median_smooth(mask, f);
      },
      filter);
}

DistanceMap::DistanceMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("DistanceMap: size mismatch");
}

namespace {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared 1D pass.
void squared_edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                    std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

DistanceMap distance_transform(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  const int pw = w + 2, ph = h + 2;

  // Column pass: exact 1D distance to the nearest background in the column,
  // with the implicit ring at rows -1 and h.
  std::vector<double> col(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int x = 0; x < w; ++x) {
    double run = 0.0;
    for (int y = 0; y < h; ++y) {
      run = mask.at(x, y) ? run + 1.0 : 0.0;
      col[static_cast<std::size_t>(y + 1) * pw + x + 1] = run;
    }
    run = 0.0;
    for (int y = h - 1; y >= 0; --y) {
      run = mask.at(x, y) ? run + 1.0 : 0.0;
      auto& c = col[static_cast<std::size_t>(y + 1) * pw + x + 1];
      c = std::min(c, run);
    }
  }

  std::vector<double> f(pw), d(pw), z(pw + 1);
  std::vector<int> v(pw);
  std::vector<double> values(mask.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < pw; ++x) {
      const double c = col[static_cast<std::size_t>(y + 1) * pw + x];
      f[x] = c * c;
    }
    squared_edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x)
      values[static_cast<std::size_t>(y) * w + x] = mask.at(x, y) ? std::sqrt(d[x + 1]) : 0.0;
  }
  return DistanceMap(w, h, std::move(values));
}

PixelCoord distance_argmax(const DistanceMap& dist, const BinaryMask& region) {
  PixelCoord best{-1, -1};
  double best_value = -1.0;
  for (int y = 0; y < region.height(); ++y)
    for (int x = 0; x < region.width(); ++x)
      if (region.at(x, y) && dist.at(x, y) > best_value) {
        best_value = dist.at(x, y);
        best = {x, y};
      }
  return best;
}

BinaryMask threshold_distance_component(const BinaryMask& mask, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("threshold_distance_component: fraction must be in [0, 1)");
  const int w = mask.width(), h = mask.height();
  const auto labels = connected_components(mask, Connectivity::Eight);

  std::vector<BoundingBox> boxes(labels.count, BoundingBox{w, h, 0, 0});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (const int id = labels.at(x, y); id > 0) {
        auto& b = boxes[id - 1];
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }

  BinaryMask out(w, h);
  for (int id = 1; id <= labels.count; ++id) {
    // One pixel of margin guarantees a background ring around the component;
    // at the canvas edge the implicit ring plays that role.
    const auto& b = boxes[id - 1];
    const int x0 = std::max(b.x0 - 1, 0), y0 = std::max(b.y0 - 1, 0);
    const int x1 = std::min(b.x1 + 1, w), y1 = std::min(b.y1 + 1, h);
    BinaryMask crop(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if (labels.at(x, y) == id) crop.set(x - x0, y - y0);
    const auto dist = distance_transform(crop);
    const double peak = *std::max_element(dist.values().begin(), dist.values().end());
    const double cut = fraction * peak;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if (crop.at(x - x0, y - y0) && dist.at(x - x0, y - y0) >= cut) out.set(x, y);
  }
  return out;
}

std::vector<BinaryMask> partition_component(const BinaryMask& component, int cell_size) {
  if (cell_size < 1) throw std::invalid_argument("partition_component: cell_size must be >= 1");
  const auto box = bounding_box(component);
  if (box.empty()) return {};
  auto bands = [&](int extent) { return extent > cell_size ? (extent + cell_size - 1) / cell_size : 1; };
  const int nx = bands(box.width());
  const int ny = bands(box.height());

  std::vector<BinaryMask> pieces;
  for (int j = 0; j < ny; ++j) {
    const int ya = box.y0 + j * box.height() / ny;
    const int yb = box.y0 + (j + 1) * box.height() / ny;
    for (int i = 0; i < nx; ++i) {
      const int xa = box.x0 + i * box.width() / nx;
      const int xb = box.x0 + (i + 1) * box.width() / nx;
      BinaryMask piece(component.width(), component.height());
      bool any = false;
      for (int y = ya; y < yb; ++y)
        for (int x = xa; x < xb; ++x)
          if (component.at(x, y)) {
            piece.set(x, y);
            any = true;
          }
      if (any) pieces.push_back(std::move(piece));
    }
  }
  return pieces;
}

}  // namespace sqseg
