#include "sqseg/pipeline.hpp"

#include <algorithm>
#include <set>

namespace sqseg {

int reflect_index(int i, int n) noexcept {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

Patch extract_patch(const Tensor& image, PixelCoord center, int size) {
  require_feature_map(image, "extract_patch");
  if (size <= 0 || size % 32 != 0)
    throw std::invalid_argument("extract_patch: size must be a positive multiple of 32");
  const int w = static_cast<int>(image.width()), h = static_cast<int>(image.height());
  if (w == 0 || h == 0) throw TensorError("extract_patch: empty image");
  Patch p{Tensor({image.channels(), static_cast<std::size_t>(size), static_cast<std::size_t>(size)}),
          {center.x - size / 2, center.y - size / 2, size, w, h}};
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (int y = 0; y < size; ++y) {
      const int sy = reflect_index(p.placement.y0 + y, h);
      for (int x = 0; x < size; ++x)
        p.data.at(c, y, x) = image.at(c, sy, reflect_index(p.placement.x0 + x, w));
    }
  return p;
}

void write_back(const Tensor& patch, const Placement& placement, Tensor& image) {
  require_feature_map(patch, "write_back patch");
  require_feature_map(image, "write_back image");
  if (patch.channels() != image.channels() || patch.height() != static_cast<std::size_t>(placement.size) ||
      patch.width() != static_cast<std::size_t>(placement.size) ||
      image.width() != static_cast<std::size_t>(placement.image_width) ||
      image.height() != static_cast<std::size_t>(placement.image_height))
    throw DimensionError("write_back: patch or image does not match the placement record");
  const int ys = std::max(0, placement.y0), ye = std::min(placement.image_height, placement.y0 + placement.size);
  const int xs = std::max(0, placement.x0), xe = std::min(placement.image_width, placement.x0 + placement.size);
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (int y = ys; y < ye; ++y)
      for (int x = xs; x < xe; ++x) image.at(c, y, x) = patch.at(c, y - placement.y0, x - placement.x0);
}

Tensor build_input(const Tensor& rgb, const SignalPair& pair) {
  require_feature_map(rgb, "build_input");
  if (rgb.channels() != 3) throw TensorError("build_input: image must have 3 channels");
  const auto w = static_cast<int>(rgb.width()), h = static_cast<int>(rgb.height());
  if (pair.inclusion.width() != w || pair.inclusion.height() != h || pair.exclusion.width() != w ||
      pair.exclusion.height() != h)
    throw DimensionError("build_input: signal maps are " + std::to_string(pair.inclusion.width()) + "x" +
                         std::to_string(pair.inclusion.height()) + ", image is " + std::to_string(w) + "x" +
                         std::to_string(h));
  Tensor in({5, rgb.height(), rgb.width()});
  std::copy(rgb.values().begin(), rgb.values().end(), in.values().begin());
  for (std::size_t i = 0; i < rgb.plane(); ++i) {
    in.channel(3)[i] = pair.inclusion[i] ? 1.0f : 0.0f;
    in.channel(4)[i] = pair.exclusion[i] ? 1.0f : 0.0f;
  }
  return in;
}

ClassProbMap segment_one(const Tensor& rgb_patch, const SignalPair& pair, const SegmentationModel& model,
                         int class_id) {
  const Tensor input = build_input(rgb_patch, pair);
  if (input.height() % 32 != 0 || input.width() % 32 != 0)
    throw DimensionError("segment_one: patch is " + std::to_string(input.width()) + "x" +
                         std::to_string(input.height()) + ", dims must be multiples of 32");
  Tensor out = model.predict(input);
  if (out.shape() != Shape{1, input.height(), input.width()})
    throw DimensionError("segment_one: model returned " + shape_string(out.shape()));
  return {class_id, static_cast<int>(input.width()), static_cast<int>(input.height()), std::move(out.storage())};
}

namespace {

void check_map(const ClassProbMap& m, int width, int height, const char* what) {
  if (m.width != width || m.height != height ||
      m.probs.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DimensionError(std::string(what) + ": probability map for class " + std::to_string(m.class_id) +
                         " is " + std::to_string(m.width) + "x" + std::to_string(m.height) + ", scene is " +
                         std::to_string(width) + "x" + std::to_string(height));
}

// class id -> element-wise max over all maps of that class
std::map<int, std::vector<float>> combine(const std::vector<ClassProbMap>& maps, int width, int height,
                                          const char* what) {
  std::map<int, std::vector<float>> by_class;
  for (const auto& m : maps) {
    check_map(m, width, height, what);
    auto [it, fresh] = by_class.try_emplace(m.class_id, m.probs);
    if (!fresh)
      for (std::size_t i = 0; i < m.probs.size(); ++i) it->second[i] = std::max(it->second[i], m.probs[i]);
  }
  return by_class;
}

}  // namespace

LabelMask assemble_semantic_map(const std::vector<ClassProbMap>& maps, int width, int height, int num_classes) {
  for (const auto& m : maps)
    if (m.class_id < 1 || m.class_id > num_classes)
      throw std::invalid_argument("assemble_semantic_map: class id " + std::to_string(m.class_id) +
                                  " out of range");
  const auto by_class = combine(maps, width, height, "assemble_semantic_map");
  LabelMask out(width, height, num_classes);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(width) * height, 0);
  std::vector<float> best(labels.size(), 0.5f);
  // Ascending ids with a strict comparison keeps the lowest id on ties.
  for (const auto& [id, probs] : by_class)
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] > best[i] || (probs[i] == best[i] && labels[i] == 0)) {
        best[i] = probs[i];
        labels[i] = static_cast<std::uint8_t>(id);
      }
  return LabelMask(width, height, std::move(labels), num_classes);
}

MetricsReport evaluate_scene(const LabelMask& pred, const std::vector<ClassProbMap>& probmaps, const LabelMask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw DimensionError("evaluate_scene: prediction is " + std::to_string(pred.width()) + "x" +
                         std::to_string(pred.height()) + ", ground truth is " + std::to_string(gt.width()) +
                         "x" + std::to_string(gt.height()));
  const auto by_class = combine(probmaps, gt.width(), gt.height(), "evaluate_scene");
  std::set<int> classes;
  for (int c : pred.present_classes()) classes.insert(c);
  for (int c : gt.present_classes()) classes.insert(c);

  MetricsReport r;
  std::size_t inter = 0, sizes = 0;
  std::vector<double> pooled_scores;
  std::vector<std::uint8_t> pooled_labels;
  int with_auc = 0;
  double auc_sum = 0.0;
  for (int c : classes) {
    const BinaryMask p = pred.class_mask(c), g = gt.class_mask(c);
    ClassMetrics m{dice_score(p, g), accuracy(p, g), std::nullopt};
    if (auto it = by_class.find(c); it != by_class.end()) {
      m.auc = auc(it->second, g);
      pooled_scores.insert(pooled_scores.end(), it->second.begin(), it->second.end());
      pooled_labels.insert(pooled_labels.end(), g.bits().begin(), g.bits().end());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      inter += p[i] && g[i];
      sizes += p[i] + g[i];
    }
    r.overall.dice += m.dice;
    r.overall.accuracy += m.accuracy;
    if (m.auc) {
      auc_sum += *m.auc;
      ++with_auc;
    }
    r.per_class.emplace(c, m);
  }
  if (!classes.empty()) {
    r.overall.dice /= static_cast<double>(classes.size());
    r.overall.accuracy /= static_cast<double>(classes.size());
  } else {
    r.overall.dice = 1.0;
    r.overall.accuracy = 1.0;
  }
  if (with_auc > 0) r.overall.auc = auc_sum / with_auc;

  r.micro.dice = sizes == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sizes);
  std::size_t same = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) same += pred[i] == gt[i];
  r.micro.accuracy = static_cast<double>(same) / static_cast<double>(pred.size());
  if (!pooled_scores.empty()) r.micro.auc = auc(pooled_scores, pooled_labels);
  return r;
}

namespace {

int round_up32(int v) { return (v + 31) / 32 * 32; }

BinaryMask pad_mask(const BinaryMask& m, int w, int h) {
  BinaryMask out(w, h);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) out.set(x, y);
  return out;
}

}  // namespace

SceneResult segment_scene(const Tensor& rgb, const std::vector<Squiggle>& squiggles, const SegmentationModel& model,
                          int num_classes, const SceneOptions& options) {
  require_feature_map(rgb, "segment_scene");
  if (rgb.channels() != 3) throw TensorError("segment_scene: image must have 3 channels");
  const int w = static_cast<int>(rgb.width()), h = static_cast<int>(rgb.height());
  if (w == 0 || h == 0) throw TensorError("segment_scene: empty image");
  if (squiggles.empty()) throw std::invalid_argument("segment_scene: at least one squiggle is required");
  std::set<int> ids;
  for (const auto& s : squiggles) {
    s.validate();
    if (s.class_id < 1 || s.class_id > num_classes)
      throw std::invalid_argument("invalid class id " + std::to_string(s.class_id));
    ids.insert(s.class_id);
  }
  const std::vector<int> classes(ids.begin(), ids.end());

  const Tensor image = options.stain_target ? reinhard_normalize(rgb, *options.stain_target) : rgb;
  const int pw = round_up32(w), ph = round_up32(h);
  Tensor padded({3, static_cast<std::size_t>(ph), static_cast<std::size_t>(pw)});
  for (std::size_t c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x) padded.at(c, y, x) = image.at(c, reflect_index(y, h), reflect_index(x, w));

  SceneResult result{LabelMask(w, h, num_classes), std::vector<ClassProbMap>(classes.size())};
  parallel_for(classes.size(), std::max(1, options.class_threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const SignalPair pair = rasterize_squiggle(squiggles, classes[k], w, h);
      const SignalPair big{pad_mask(pair.inclusion, pw, ph), pad_mask(pair.exclusion, pw, ph)};
      const ClassProbMap full = segment_one(padded, big, model, classes[k]);
      ClassProbMap crop{classes[k], w, h, std::vector<float>(static_cast<std::size_t>(w) * h)};
      for (int y = 0; y < h; ++y)
        std::copy_n(full.probs.begin() + static_cast<std::ptrdiff_t>(y) * pw, w,
                    crop.probs.begin() + static_cast<std::ptrdiff_t>(y) * w);
      result.probmaps[k] = std::move(crop);
    }
  });
  result.labels = assemble_semantic_map(result.probmaps, w, h, num_classes);
  return result;
}

}  // namespace sqseg
