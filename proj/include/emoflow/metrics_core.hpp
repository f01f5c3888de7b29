#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "emoflow/label.hpp"

namespace emoflow {

/// 6x6 gold-by-predicted counts.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kLabelCount>, kLabelCount> counts{};
  std::uint64_t total = 0;

  void record(EmotionLabel gold, EmotionLabel predicted) {
    ++counts[label_index(gold)][label_index(predicted)];
    ++total;
  }

  std::uint64_t at(EmotionLabel gold, EmotionLabel predicted) const {
    return counts[label_index(gold)][label_index(predicted)];
  }

  std::uint64_t gold_support(EmotionLabel label) const {
    std::uint64_t s = 0;
    for (std::uint64_t c : counts[label_index(label)]) s += c;
    return s;
  }

  std::uint64_t predicted_count(EmotionLabel label) const {
    std::uint64_t s = 0;
    for (const auto& row : counts) s += row[label_index(label)];
    return s;
  }

  std::uint64_t diagonal() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < kLabelCount; ++i) s += counts[i][i];
    return s;
  }
};

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  std::array<LabelMetrics, kLabelCount> per_label{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::uint64_t evaluated = 0;

  const LabelMetrics& for_label(EmotionLabel l) const {
    return per_label[label_index(l)];
  }
};

/// Arithmetic mean; the macro averaging used for every reported score.
inline double macro_average(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Scores a confusion matrix. Per-label precision/recall/F1 score 0 whenever
/// their denominator is 0; macro averages run over labels with gold support
/// only, so a label absent from gold never drags the mean.
inline MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  MetricsReport report;
  report.evaluated = cm.total;

  std::vector<double> precisions, recalls, f1s;
  for (EmotionLabel label : kAllLabels) {
    const std::uint64_t tp = cm.at(label, label);
    const std::uint64_t support = cm.gold_support(label);
    const std::uint64_t predicted = cm.predicted_count(label);

    LabelMetrics& m = report.per_label[label_index(label)];
    m.support = support;
    m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;

    if (support > 0) {
      precisions.push_back(m.precision);
      recalls.push_back(m.recall);
      f1s.push_back(m.f1);
    }
  }
  report.macro_precision = macro_average(precisions);
  report.macro_recall = macro_average(recalls);
  report.macro_f1 = macro_average(f1s);
  report.accuracy =
      cm.total > 0 ? static_cast<double>(cm.diagonal()) / static_cast<double>(cm.total) : 0.0;
  return report;
}

}  // namespace emoflow
