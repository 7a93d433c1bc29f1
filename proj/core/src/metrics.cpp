#include "thermocad/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "thermocad/nn/trainer.hpp"

namespace thermocad::metrics {

namespace {

Metric ratio(long long num, long long den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores, double threshold) {
  if (labels.size() != scores.size()) {
    raise(Errc::LengthMismatch, std::to_string(labels.size()) + " labels vs " + std::to_string(scores.size()) +
                                    " scores");
  }
  if (labels.empty()) raise(Errc::EmptyInput, "no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Metric precision(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fp); }
Metric sensitivity(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }
Metric accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }

Metric f1(const ConfusionMatrix& cm) {
  const Metric p = precision(cm);
  const Metric s = sensitivity(cm);
  if (p.undefined || s.undefined || p.value + s.value == 0.0) return {0.0, true};
  return {2.0 * p.value * s.value / (p.value + s.value), false};
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) raise(Errc::LengthMismatch, "labels and scores differ in length");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives.
  double rank_sum = 0.0;
  long long n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const long long n_neg = static_cast<long long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) raise(Errc::SingleClass, "roc_auc needs both classes");
  const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::string_view to_string(Aggregate a) noexcept {
  return a == Aggregate::PerImage ? "per_image" : "per_patient_mean_prob";
}

Aggregate parse_aggregate(std::string_view name) {
  if (name == "per_image") return Aggregate::PerImage;
  if (name == "per_patient_mean_prob") return Aggregate::PerPatientMeanProb;
  raise(Errc::ConfigError, "unknown aggregate '" + std::string(name) + "'");
}

MetricsReport evaluate_scores(std::span<const int> labels, std::span<const double> scores,
                              std::span<const std::string> patient_ids, double threshold, Aggregate aggregate) {
  if (labels.size() != scores.size()) raise(Errc::LengthMismatch, "labels and scores differ in length");
  MetricsReport r;
  r.threshold = threshold;
  r.aggregate = aggregate;

  std::vector<int> eval_labels(labels.begin(), labels.end());
  std::vector<double> eval_scores(scores.begin(), scores.end());
  if (aggregate == Aggregate::PerPatientMeanProb) {
    if (patient_ids.size() != labels.size()) raise(Errc::LengthMismatch, "patient ids and labels differ in length");
    std::map<std::string, std::pair<double, int>> sums;
    std::map<std::string, int> label_of;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& s = sums[patient_ids[i]];
      s.first += scores[i];
      ++s.second;
      label_of[patient_ids[i]] = labels[i];
    }
    eval_labels.clear();
    eval_scores.clear();
    for (const auto& [id, s] : sums) {
      const double mean = s.first / s.second;
      r.per_patient[id] = mean;
      eval_labels.push_back(label_of[id]);
      eval_scores.push_back(mean);
    }
  }

  r.cm = confusion(eval_labels, eval_scores, threshold);
  r.n_samples = r.cm.total();
  const auto take = [&](Metric m, const char* name) {
    if (m.undefined) r.flags.emplace_back(name);
    return m.value;
  };
  r.accuracy = take(accuracy(r.cm), "accuracy");
  r.precision = take(precision(r.cm), "precision");
  r.sensitivity = take(sensitivity(r.cm), "sensitivity");
  r.f1 = take(f1(r.cm), "f1");
  const bool both = std::any_of(eval_labels.begin(), eval_labels.end(), [](int l) { return l == 1; }) &&
                    std::any_of(eval_labels.begin(), eval_labels.end(), [](int l) { return l != 1; });
  if (both) {
    r.roc_auc = roc_auc(eval_labels, eval_scores);
  } else {
    r.flags.emplace_back("roc_auc");
  }
  return r;
}

MetricsReport evaluate(nn::Model<float>& model, std::span<const imgproc::LabeledImage> test_set, double threshold,
                       Aggregate aggregate) {
  const nn::Evaluation ev = nn::evaluate_set(model, test_set);
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (const auto& item : test_set) {
    labels.push_back(item.label);
    ids.push_back(item.patient_id);
  }
  return evaluate_scores(labels, ev.sick_probability, ids, threshold, aggregate);
}

std::size_t select_best(std::span<const MetricsReport> reports) {
  if (reports.empty()) raise(Errc::EmptyInput, "no reports to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& a = reports[i];
    const auto& b = reports[best];
    if (a.f1 > b.f1 || (a.f1 == b.f1 && a.sensitivity > b.sensitivity)) best = i;
  }
  return best;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::json j{{"model_id", r.model_id},
                   {"accuracy", r.accuracy},
                   {"precision", r.precision},
                   {"sensitivity", r.sensitivity},
                   {"f1", r.f1},
                   {"roc_auc", r.roc_auc},
                   {"threshold", r.threshold},
                   {"n_samples", r.n_samples},
                   {"aggregate", std::string(to_string(r.aggregate))},
                   {"confusion", {{"tp", r.cm.tp}, {"fp", r.cm.fp}, {"fn", r.cm.fn}, {"tn", r.cm.tn}}},
                   {"flags", r.flags}};
  if (!r.per_patient.empty()) j["per_patient"] = r.per_patient;
  return j.dump();
}

std::string csv_header() { return "model_id,accuracy,f1,precision,sensitivity,roc_auc,n,threshold,aggregate,flags"; }

std::string csv_row(const MetricsReport& r) {
  std::string flags;
  for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
  return r.model_id + "," + fmt(r.accuracy) + "," + fmt(r.f1) + "," + fmt(r.precision) + "," + fmt(r.sensitivity) +
         "," + fmt(r.roc_auc) + "," + std::to_string(r.n_samples) + "," + fmt(r.threshold) + "," +
         std::string(to_string(r.aggregate)) + "," + flags;
}

}  // namespace thermocad::metrics
