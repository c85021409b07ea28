#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sqseg/mask.hpp"
#include "sqseg/metrics.hpp"
#include "sqseg/network.hpp"
#include "sqseg/signal.hpp"
#include "sqseg/stain.hpp"
#include "sqseg/tensor.hpp"

namespace sqseg {

struct ClassProbMap {
  int class_id = 0;
  int width = 0;
  int height = 0;
  std::vector<float> probs;  // row-major
};

/// Where a patch came from: its top-left corner in image coordinates (may
/// be negative) and the source extent.
struct Placement {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
  int image_width = 0;
  int image_height = 0;
};

struct Patch {
  Tensor data;  // (C, size, size)
  Placement placement;
};

/// Symmetric reflection of an arbitrary index into [0, n).
int reflect_index(int i, int n) noexcept;

/// size x size crop whose top-left is center - size / 2, reflected where it
/// leaves the image. size must be a positive multiple of 32.
Patch extract_patch(const Tensor& image, PixelCoord center, int size = 512);

/// Copies the in-image part of `patch` back to its source location.
void write_back(const Tensor& patch, const Placement& placement, Tensor& image);

/// Anything mapping a (5, H, W) input to a (1, H, W) probability map.
class SegmentationModel {
 public:
  virtual ~SegmentationModel() = default;
  virtual Tensor predict(const Tensor& input) const = 0;
  virtual std::string model_id() const = 0;
};

class NetworkModel final : public SegmentationModel {
 public:
  NetworkModel(std::shared_ptr<const EfficientUNet> net, std::string id, int threads = 1)
      : net_(std::move(net)), id_(std::move(id)), threads_(threads) {}
  Tensor predict(const Tensor& input) const override { return net_->forward(input, threads_); }
  std::string model_id() const override { return id_; }

 private:
  std::shared_ptr<const EfficientUNet> net_;
  std::string id_;
  int threads_;
};

/// [R, G, B, inclusion, exclusion] as a (5, H, W) tensor.
Tensor build_input(const Tensor& rgb, const SignalPair& pair);

/// Runs the model on one patch. Dims must agree and be multiples of 32;
/// throws DimensionError otherwise.
ClassProbMap segment_one(const Tensor& rgb_patch, const SignalPair& pair, const SegmentationModel& model,
                         int class_id);

/// Same-class maps are max-combined; a pixel takes the class of the largest
/// probability when that is >= 0.5 (lowest id on ties), else 0.
LabelMask assemble_semantic_map(const std::vector<ClassProbMap>& maps, int width, int height,
                                int num_classes = LabelMask::kDefaultClasses);

/// One-vs-rest dice and accuracy per class from labels, AUC from the
/// max-combined probability maps. Classes are those present in pred or gt.
MetricsReport evaluate_scene(const LabelMask& pred, const std::vector<ClassProbMap>& probmaps,
                             const LabelMask& gt);

struct SceneOptions {
  std::optional<StainStats> stain_target;
  int class_threads = 1;  // concurrent per-class inference runs
};

struct SceneResult {
  LabelMask labels;
  std::vector<ClassProbMap> probmaps;  // ascending class id
};

/// Squiggles -> per-class signal pairs -> model -> assembled labels. The
/// image is reflect-padded (signals zero-padded) up to a multiple of 32 and
/// results are cropped back. Classes are processed in ascending id order.
SceneResult segment_scene(const Tensor& rgb, const std::vector<Squiggle>& squiggles,
                          const SegmentationModel& model, int num_classes = LabelMask::kDefaultClasses,
                          const SceneOptions& options = {});

}  // namespace sqseg
