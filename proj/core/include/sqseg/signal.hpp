#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "sqseg/geometry.hpp"
#include "sqseg/mask.hpp"
#include "sqseg/morphology.hpp"
#include "sqseg/random.hpp"

namespace sqseg {

class EmptyRegionError : public std::invalid_argument {
 public:
  EmptyRegionError() : std::invalid_argument("empty region") {}
};

class ClassNotPresentError : public std::invalid_argument {
 public:
  explicit ClassNotPresentError(int class_id)
      : std::invalid_argument("class not present: " + std::to_string(class_id)), class_id(class_id) {}
  int class_id;
};

struct Range {
  double low = 0.0;
  double high = 0.0;
};

/// Knobs of the randomized guiding-signal generator. Stage probabilities
/// default to 0.75 / 0.75 / 0.5 / 0.5.
struct GenParams {
  double p_approx = 0.75;
  double p_smooth = 0.75;
  double p_partition = 0.5;
  double p_distthresh = 0.5;
  Range approx_eps_range{2.0, 10.0};
  Range smooth_kernel_range{9.0, 25.0};  // odd bounds
  Range smooth_sigma_range{3.0, 15.0};
  int partition_cell = 96;
  Range distthresh_fraction_range{0.1, 0.7};
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const GenParams& p);
/// Missing keys keep their defaults; the result is validated.
void from_json(const nlohmann::json& j, GenParams& p);

/// Which stages fired for one generator call and with what draws.
struct AppliedStages {
  bool approx = false;
  bool smooth = false;
  bool partition = false;
  bool distthresh = false;
  std::optional<double> epsilon;
  std::optional<SmoothingFilter> filter;
  std::optional<double> fraction;
  int fallback_pixels = 0;  // components rescued by the argmax fallback
};

void to_json(nlohmann::json& j, const AppliedStages& s);

struct GuidingSignal {
  BinaryMask signal;
  AppliedStages stages;
};

/// Runs approximate -> smooth -> partition -> distance-threshold on a copy of
/// `gt_region` (one coin per stage from `rng`), skeletonizes every piece,
/// unions and clips to the region. Every 8-connected component of the region
/// receives at least one signal pixel. Throws EmptyRegionError.
GuidingSignal generate_guiding_signal(const BinaryMask& gt_region, const GenParams& params,
                                      RngStream& rng);

struct SignalPair {
  BinaryMask inclusion;
  BinaryMask exclusion;
  friend bool operator==(const SignalPair&, const SignalPair&) = default;
};

struct TrainingPair {
  SignalPair signals;
  std::map<int, AppliedStages> stages;  // per class id
};

/// Inclusion from the target class, exclusion from each other present class;
/// each class draws from RngStream(params.seed).derive(class_id). Inclusion
/// wins where the two overlap. Throws ClassNotPresentError.
TrainingPair make_training_pair(const LabelMask& gt_labels, int target_class,
                                const GenParams& params);

/// Freehand stroke in pixel-index coordinates (pixel (x, y) sits at (x, y)).
struct Squiggle {
  std::vector<Point2> points;
  int class_id = 1;
  double radius = 2.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const Squiggle& s);
void from_json(const nlohmann::json& j, Squiggle& s);

/// Pixels within `radius` of a squiggle of `target_class` form the
/// inclusion map; all other classes form the exclusion map.
SignalPair rasterize_squiggle(const std::vector<Squiggle>& squiggles, int target_class,
                              int width, int height);

/// Swept-disk footprint of a single squiggle.
BinaryMask rasterize_stroke(const Squiggle& squiggle, int width, int height);

}  // namespace sqseg
