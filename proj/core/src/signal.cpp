#include "sqseg/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sqseg {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("GenParams: " + what);
}

void require_probability(double p, const char* name) {
  require(p >= 0.0 && p <= 1.0, std::string(name) + " must be in [0, 1]");
}

void require_range(const Range& r, const char* name) {
  require(std::isfinite(r.low) && std::isfinite(r.high) && r.low <= r.high,
          std::string(name) + " must satisfy low <= high");
}

bool is_odd_integer(double v) {
  return v == std::floor(v) && static_cast<long long>(v) % 2 != 0;
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.low, r.high}); }

Range range_from(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument(std::string("GenParams: ") + name + " must be [low, high]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

void GenParams::validate() const {
  require_probability(p_approx, "p_approx");
  require_probability(p_smooth, "p_smooth");
  require_probability(p_partition, "p_partition");
  require_probability(p_distthresh, "p_distthresh");
  require_range(approx_eps_range, "approx_eps_range");
  require(approx_eps_range.low >= 0.0, "approx_eps_range must be non-negative");
  require_range(smooth_kernel_range, "smooth_kernel_range");
  require(is_odd_integer(smooth_kernel_range.low) && is_odd_integer(smooth_kernel_range.high) &&
              smooth_kernel_range.low >= 3,
          "smooth_kernel_range bounds must be odd integers >= 3");
  require_range(smooth_sigma_range, "smooth_sigma_range");
  require(smooth_sigma_range.low > 0.0, "smooth_sigma_range must be positive");
  require(partition_cell >= 1, "partition_cell must be >= 1");
  require_range(distthresh_fraction_range, "distthresh_fraction_range");
  require(distthresh_fraction_range.low >= 0.0 && distthresh_fraction_range.high < 1.0,
          "distthresh_fraction_range must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const GenParams& p) {
  j = nlohmann::json{
      {"p_approx", p.p_approx},
      {"p_smooth", p.p_smooth},
      {"p_partition", p.p_partition},
      {"p_distthresh", p.p_distthresh},
      {"approx_eps_range", range_json(p.approx_eps_range)},
      {"smooth_kernel_range", range_json(p.smooth_kernel_range)},
      {"smooth_sigma_range", range_json(p.smooth_sigma_range)},
      {"partition_cell", p.partition_cell},
      {"distthresh_fraction_range", range_json(p.distthresh_fraction_range)},
      {"seed", p.seed},
  };
}

void from_json(const nlohmann::json& j, GenParams& p) {
  if (!j.is_object()) throw std::invalid_argument("GenParams: expected a JSON object");
  p.p_approx = j.value("p_approx", p.p_approx);
  p.p_smooth = j.value("p_smooth", p.p_smooth);
  p.p_partition = j.value("p_partition", p.p_partition);
  p.p_distthresh = j.value("p_distthresh", p.p_distthresh);
  if (j.contains("approx_eps_range")) p.approx_eps_range = range_from(j["approx_eps_range"], "approx_eps_range");
  if (j.contains("smooth_kernel_range"))
    p.smooth_kernel_range = range_from(j["smooth_kernel_range"], "smooth_kernel_range");
  if (j.contains("smooth_sigma_range"))
    p.smooth_sigma_range = range_from(j["smooth_sigma_range"], "smooth_sigma_range");
  p.partition_cell = j.value("partition_cell", p.partition_cell);
  if (j.contains("distthresh_fraction_range"))
    p.distthresh_fraction_range = range_from(j["distthresh_fraction_range"], "distthresh_fraction_range");
  p.seed = j.value("seed", p.seed);
  p.validate();
}

void to_json(nlohmann::json& j, const AppliedStages& s) {
  j = nlohmann::json{{"approx", s.approx},
                     {"smooth", s.smooth},
                     {"partition", s.partition},
                     {"distthresh", s.distthresh},
                     {"fallback_pixels", s.fallback_pixels}};
  if (s.epsilon) j["epsilon"] = *s.epsilon;
  if (s.fraction) j["fraction"] = *s.fraction;
  if (s.filter) {
    std::visit(
        [&](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, GaussianFilter>)
            j["filter"] = {{"type", "gaussian"}, {"kernel", f.kernel}, {"sigma", f.sigma}};
          else
            j["filter"] = {{"type", "median"}, {"kernel", f.kernel}};
        },
        *s.filter);
  }
}

GuidingSignal generate_guiding_signal(const BinaryMask& gt_region, const GenParams& params,
                                      RngStream& rng) {
  if (gt_region.empty()) throw EmptyRegionError();
  params.validate();
  const int w = gt_region.width(), h = gt_region.height();
  AppliedStages stages;
  BinaryMask modified = gt_region;

  if ((stages.approx = rng.bernoulli(params.p_approx))) {
    const double eps = rng.uniform(params.approx_eps_range.low, params.approx_eps_range.high);
    stages.epsilon = eps;
    BinaryMask approximated(w, h);
    for (const auto& component : split_components(modified)) {
      std::vector<Polygon> rings;
      for (const auto& ring : mask_to_polygons(component))
        rings.push_back(approximate_polygon(ring, eps));
      approximated |= polygons_to_mask(rings, w, h);
    }
    modified = std::move(approximated);
  }

  if ((stages.smooth = rng.bernoulli(params.p_smooth))) {
    const bool gaussian = rng.bernoulli(0.5);
    const auto klo = static_cast<std::int64_t>(params.smooth_kernel_range.low);
    const auto khi = static_cast<std::int64_t>(params.smooth_kernel_range.high);
    const int kernel = static_cast<int>(klo + 2 * rng.uniform_int(0, (khi - klo) / 2));
    SmoothingFilter filter = MedianFilter{kernel};
    if (gaussian)
      filter = GaussianFilter{kernel, rng.uniform(params.smooth_sigma_range.low,
                                                  params.smooth_sigma_range.high)};
    stages.filter = filter;
    modified = smooth_mask(modified, filter);
  }

  std::vector<BinaryMask> pieces;
  if ((stages.partition = rng.bernoulli(params.p_partition))) {
    for (const auto& component : split_components(modified))
      for (auto& piece : partition_component(component, params.partition_cell))
        pieces.push_back(std::move(piece));
  } else if (!modified.empty()) {
    pieces.push_back(std::move(modified));
  }

  if ((stages.distthresh = rng.bernoulli(params.p_distthresh))) {
    const double fraction =
        rng.uniform(params.distthresh_fraction_range.low, params.distthresh_fraction_range.high);
    stages.fraction = fraction;
    for (auto& piece : pieces) piece = threshold_distance_component(piece, fraction);
  }

  BinaryMask signal(w, h);
  for (const auto& piece : pieces) signal |= skeletonize(piece);
  signal &= gt_region;

  // Components the modifications erased get one pixel at their deepest point.
  const auto labels = connected_components(gt_region, Connectivity::Eight);
  std::vector<char> covered(labels.count + 1, 0);
  for (std::size_t i = 0; i < signal.size(); ++i)
    if (signal[i]) covered[labels.ids[i]] = 1;
  const auto dist = distance_transform(gt_region);
  for (int id = 1; id <= labels.count; ++id) {
    if (covered[id]) continue;
    const auto p = distance_argmax(dist, labels.component(id));
    signal.set(p.x, p.y);
    ++stages.fallback_pixels;
  }
  return {std::move(signal), stages};
}

TrainingPair make_training_pair(const LabelMask& gt_labels, int target_class,
                                const GenParams& params) {
  if (target_class < 1 || !gt_labels.has_class(target_class))
    throw ClassNotPresentError(target_class);
  const RngStream root(params.seed);
  const int w = gt_labels.width(), h = gt_labels.height();
  TrainingPair out{{BinaryMask(w, h), BinaryMask(w, h)}, {}};
  for (const int c : gt_labels.present_classes()) {
    RngStream stream = root.derive(static_cast<std::uint64_t>(c));
    auto generated = generate_guiding_signal(gt_labels.class_mask(c), params, stream);
    (c == target_class ? out.signals.inclusion : out.signals.exclusion) |= generated.signal;
    out.stages.emplace(c, generated.stages);
  }
  out.signals.exclusion.subtract(out.signals.inclusion);
  return out;
}

void Squiggle::validate() const {
  if (points.empty()) throw std::invalid_argument("squiggle needs at least one point");
  if (class_id < 1) throw std::invalid_argument("squiggle class_id must be >= 1");
  if (!(radius >= 0.5)) throw std::invalid_argument("squiggle radius must be >= 0.5");
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("squiggle coordinates must be finite");
}

void to_json(nlohmann::json& j, const Squiggle& s) {
  j = nlohmann::json{{"vertices", s.points}, {"closed", false}, {"class_id", s.class_id},
                     {"radius", s.radius}};
}

void from_json(const nlohmann::json& j, Squiggle& s) {
  if (j.contains("vertices"))
    s.points = j.at("vertices").get<std::vector<Point2>>();
  else
    s.points = j.at("points").get<std::vector<Point2>>();
  s.class_id = j.at("class_id").get<int>();
  s.radius = j.value("radius", 2.0);
  s.validate();
}

BinaryMask rasterize_stroke(const Squiggle& squiggle, int width, int height) {
  squiggle.validate();
  BinaryMask out(width, height);
  const auto& pts = squiggle.points;
  const double r = squiggle.radius;
  double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  // Clamp before converting so far-off strokes cannot overflow int.
  const int x0 = static_cast<int>(std::clamp(std::floor(xmin - r), 0.0, static_cast<double>(width)));
  const int y0 = static_cast<int>(std::clamp(std::floor(ymin - r), 0.0, static_cast<double>(height)));
  const int x1 = static_cast<int>(std::clamp(std::ceil(xmax + r), -1.0, width - 1.0));
  const int y1 = static_cast<int>(std::clamp(std::ceil(ymax + r), -1.0, height - 1.0));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Point2 c{static_cast<double>(x), static_cast<double>(y)};
      bool hit = pts.size() == 1 && point_segment_distance(c, pts[0], pts[0]) <= r;
      for (std::size_t i = 0; !hit && i + 1 < pts.size(); ++i)
        hit = point_segment_distance(c, pts[i], pts[i + 1]) <= r;
      if (hit) out.set(x, y);
    }
  return out;
}

SignalPair rasterize_squiggle(const std::vector<Squiggle>& squiggles, int target_class, int width,
                              int height) {
  SignalPair out{BinaryMask(width, height), BinaryMask(width, height)};
  for (const auto& s : squiggles)
    (s.class_id == target_class ? out.inclusion : out.exclusion) |= rasterize_stroke(s, width, height);
  out.exclusion.subtract(out.inclusion);
  return out;
}

}  // namespace sqseg
