#include "sqseg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sqseg {

double dice_score(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "dice_score");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] && gt[i];
    np += pred[i];
    ng += gt[i];
  }
  if (np + ng == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

double accuracy(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "accuracy");
  std::size_t same = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) same += pred[i] == gt[i];
  return static_cast<double>(same) / static_cast<double>(pred.size());
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size())
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(positive.size()) + " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Pair counts are integers (or halves), exact in double far beyond any image size.
  double wins = 0.0;
  std::uint64_t neg_below = 0, npos = 0, nneg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos : neg) += 1;
      ++j;
    }
    wins += static_cast<double>(pos * neg_below) + 0.5 * static_cast<double>(pos * neg);
    neg_below += neg;
    npos += pos;
    nneg += neg;
    i = j;
  }
  if (npos == 0 || nneg == 0) return std::nullopt;
  return wins / (static_cast<double>(npos) * static_cast<double>(nneg));
}

std::optional<double> auc(std::span<const float> scores, const BinaryMask& gt) {
  const std::vector<double> s(scores.begin(), scores.end());
  return auc(s, gt.bits());
}

void to_json(nlohmann::json& j, const ClassMetrics& m) {
  j = nlohmann::json{{"dice", m.dice}, {"accuracy", m.accuracy}};
  j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [id, m] : r.per_class) per[std::to_string(id)] = m;
  j = nlohmann::json{{"per_class", per}, {"overall", r.overall}, {"micro", r.micro}};
}

std::string to_csv(const MetricsReport& r, const std::map<int, std::string>& names) {
  std::ostringstream head, row;
  head.precision(17);
  row.precision(17);
  bool first = true;
  auto emit = [&](const std::string& name, const ClassMetrics& m) {
    const char* sep = first ? "" : ",";
    first = false;
    head << sep << name << "_dice," << name << "_acc," << name << "_auc";
    row << sep << m.dice << ',' << m.accuracy << ',';
    if (m.auc) row << *m.auc;
  };
  for (const auto& [id, m] : r.per_class) {
    auto it = names.find(id);
    emit(it != names.end() ? it->second : "class" + std::to_string(id), m);
  }
  emit("overall", r.overall);
  emit("micro", r.micro);
  return head.str() + "\n" + row.str() + "\n";
}

}  // namespace sqseg
