#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqseg/mask.hpp"

namespace sqseg {

/// 2|P & G| / (|P| + |G|); 1 when both are empty.
double dice_score(const BinaryMask& pred, const BinaryMask& gt);
/// Fraction of matching pixels.
double accuracy(const BinaryMask& pred, const BinaryMask& gt);

/// Mann-Whitney area under the ROC curve, ties counting one half.
/// nullopt when `positive` holds only one class.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> positive);
std::optional<double> auc(std::span<const float> scores, const BinaryMask& gt);

struct ClassMetrics {
  double dice = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;
};

struct MetricsReport {
  std::map<int, ClassMetrics> per_class;
  ClassMetrics overall;  // unweighted mean over per_class entries
  ClassMetrics micro;    // pooled over classes
};

void to_json(nlohmann::json& j, const ClassMetrics& m);
void to_json(nlohmann::json& j, const MetricsReport& r);

/// Header line plus one row: <name>_dice,<name>_acc,<name>_auc per class,
/// then overall and micro. Absent AUCs are empty fields. Classes missing
/// from `names` are written as class<id>.
std::string to_csv(const MetricsReport& r, const std::map<int, std::string>& names = {});

}  // namespace sqseg
