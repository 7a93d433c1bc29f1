#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermocad/imgproc.hpp"
#include "thermocad/nn/model.hpp"

namespace thermocad::metrics {

/// Positive class is Sick (label 1).
struct ConfusionMatrix {
  long long tp = 0, fp = 0, fn = 0, tn = 0;

  long long total() const noexcept { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// A metric value plus whether its denominator was zero (value is then 0).
struct Metric {
  double value = 0.0;
  bool undefined = false;
};

/// Predicts positive when score >= threshold.
ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores, double threshold = 0.5);

Metric precision(const ConfusionMatrix& cm);
Metric sensitivity(const ConfusionMatrix& cm);
Metric f1(const ConfusionMatrix& cm);
Metric accuracy(const ConfusionMatrix& cm);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Average ranks, O(N log N).
double roc_auc(std::span<const int> labels, std::span<const double> scores);

enum class Aggregate { PerImage, PerPatientMeanProb };
std::string_view to_string(Aggregate a) noexcept;
Aggregate parse_aggregate(std::string_view name);

struct MetricsReport {
  std::string model_id;
  double accuracy = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double threshold = 0.5;
  long long n_samples = 0;
  Aggregate aggregate = Aggregate::PerImage;
  ConfusionMatrix cm;
  std::vector<std::string> flags;  // names of undefined metrics
  std::map<std::string, double> per_patient;
};

/// Metrics from precomputed sick-class scores. roc_auc is flagged
/// undefined when only one class is present.
MetricsReport evaluate_scores(std::span<const int> labels, std::span<const double> scores,
                              std::span<const std::string> patient_ids, double threshold = 0.5,
                              Aggregate aggregate = Aggregate::PerImage);

MetricsReport evaluate(nn::Model<float>& model, std::span<const imgproc::LabeledImage> test_set,
                       double threshold = 0.5, Aggregate aggregate = Aggregate::PerImage);

/// Highest f1, then highest sensitivity, then lowest index.
std::size_t select_best(std::span<const MetricsReport> reports);

std::string to_json(const MetricsReport& report);
std::string csv_header();
std::string csv_row(const MetricsReport& report);

}  // namespace thermocad::metrics
