#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "test_util.hpp"
#include "thermocad/metrics.hpp"
#include "thermocad/nn/trainer.hpp"
#include "thermocad/random.hpp"

using namespace thermocad;
using namespace thermocad::metrics;
using thermocad::testing::code_of;

namespace {

ConfusionMatrix cm_of(long long tp, long long fp, long long fn, long long tn) { return {tp, fp, fn, tn}; }

MetricsReport report(double f1_value, double sens) {
  MetricsReport r;
  r.f1 = f1_value;
  r.sensitivity = sens;
  return r;
}

void random_case(Rng& rng, std::size_t n, std::vector<int>& labels, std::vector<double>& scores, bool coarse) {
  labels.assign(n, 0);
  scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.4) ? 1 : 0;
    // Coarse scores produce many ties.
    scores[i] = coarse ? static_cast<double>(rng.below(11)) / 10.0 : rng.uniform();
  }
  labels[0] = 1;
  labels[1] = 0;
}

}  // namespace

TEST(Confusion, DirectCount) {
  const std::vector<int> labels{1, 1, 0, 0};
  const std::vector<double> scores{0.9, 0.2, 0.8, 0.1};
  EXPECT_EQ(confusion(labels, scores), cm_of(1, 1, 1, 1));
}

TEST(Confusion, ScoresEqualToLabels) {
  const std::vector<int> labels{1, 0, 1, 1, 0};
  const std::vector<double> scores{1, 0, 1, 1, 0};
  const auto cm = confusion(labels, scores);
  EXPECT_EQ(cm.fp, 0);
  EXPECT_EQ(cm.fn, 0);
}

TEST(Confusion, ThresholdZeroPredictsAllPositive) {
  const std::vector<int> labels{1, 0, 1, 0};
  const std::vector<double> scores{0.0, 0.0, 0.3, 1.0};
  const auto cm = confusion(labels, scores, 0.0);
  EXPECT_EQ(cm.tn, 0);
  EXPECT_EQ(cm.fn, 0);
}

TEST(Confusion, TieGoesToPositive) {
  const std::vector<int> labels{0};
  const std::vector<double> scores{0.5};
  EXPECT_EQ(confusion(labels, scores).fp, 1);
}

TEST(Confusion, Errors) {
  const std::vector<int> labels{1, 0};
  const std::vector<double> one{0.5};
  EXPECT_EQ(code_of([&] { confusion(labels, one); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([] { confusion({}, {}); }), Errc::EmptyInput);
}

TEST(Ratios, ClosedForm) {
  const auto cm = cm_of(3, 1, 1, 5);
  EXPECT_DOUBLE_EQ(precision(cm).value, 0.75);
  EXPECT_DOUBLE_EQ(sensitivity(cm).value, 0.75);
  EXPECT_DOUBLE_EQ(f1(cm).value, 0.75);
  EXPECT_DOUBLE_EQ(accuracy(cm).value, 0.8);
}

TEST(Ratios, UndefinedPrecisionIsFlaggedZero) {
  const auto p = precision(cm_of(0, 0, 3, 4));
  EXPECT_TRUE(p.undefined);
  EXPECT_EQ(p.value, 0.0);
  EXPECT_TRUE(sensitivity(cm_of(0, 2, 0, 4)).undefined);
  EXPECT_FALSE(sensitivity(cm_of(0, 2, 1, 4)).undefined);
}

TEST(Ratios, F1OfPerfectPrecisionHalfSensitivity) {
  EXPECT_NEAR(f1(cm_of(1, 0, 1, 5)).value, 2.0 / 3.0, 1e-15);
}

TEST(Ratios, F1IdentityOnRandomMatrices) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto cm = cm_of(1 + rng.below(50), rng.below(50), rng.below(50), rng.below(50));
    const double closed = 2.0 * cm.tp / (2.0 * cm.tp + cm.fp + cm.fn);
    EXPECT_NEAR(f1(cm).value, closed, 1e-12);
    EXPECT_EQ(accuracy(cm).value, static_cast<double>(cm.tp + cm.tn) / cm.total());
  }
}

TEST(Ratios, MatchCountingOracle) {
  Rng rng(2);
  std::vector<int> labels;
  std::vector<double> scores;
  for (int trial = 0; trial < 200; ++trial) {
    random_case(rng, 1 + rng.below(60), labels, scores, trial % 2 == 0);
    const double threshold = static_cast<double>(rng.below(11)) / 10.0;
    const auto oracle = thermocad::testing::count_metrics(labels, scores, threshold);
    const auto r = evaluate_scores(labels, scores, {}, threshold);
    EXPECT_EQ(r.cm, cm_of(oracle.tp, oracle.fp, oracle.fn, oracle.tn));
    EXPECT_EQ(r.accuracy, oracle.accuracy);
    EXPECT_EQ(r.precision, oracle.precision);
    EXPECT_EQ(r.sensitivity, oracle.sensitivity);
    EXPECT_NEAR(r.f1, oracle.f1, 1e-15);
  }
}

TEST(RocAuc, Extremes) {
  const std::vector<int> labels{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(labels, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(labels, std::vector<double>{0.9, 0.8, 0.2, 0.1}), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(labels, std::vector<double>(4, 0.3)), 0.5);
}

TEST(RocAuc, SingleClass) {
  const std::vector<int> labels{1, 1};
  EXPECT_EQ(code_of([&] { roc_auc(labels, std::vector<double>{0.1, 0.2}); }), Errc::SingleClass);
}

TEST(RocAuc, MatchesPairwiseOracle) {
  Rng rng(3);
  std::vector<int> labels;
  std::vector<double> scores;
  for (int trial = 0; trial < 100; ++trial) {
    random_case(rng, 200, labels, scores, trial % 3 == 0);
    EXPECT_NEAR(roc_auc(labels, scores), thermocad::testing::brute_force_auc(labels, scores), 1e-12);
  }
}

TEST(RocAuc, InvariantUnderMonotoneTransforms) {
  Rng rng(4);
  std::vector<int> labels;
  std::vector<double> scores;
  for (int trial = 0; trial < 50; ++trial) {
    random_case(rng, 80, labels, scores, trial % 2 == 0);
    const double base = roc_auc(labels, scores);
    std::vector<double> cubed(scores), logit(scores);
    for (auto& s : cubed) s = s * s * s + 2.0;
    for (auto& s : logit) s = std::exp(5.0 * s);
    EXPECT_NEAR(roc_auc(labels, cubed), base, 1e-12);
    EXPECT_NEAR(roc_auc(labels, logit), base, 1e-12);
  }
}

TEST(RocAuc, ReversedScoresComplementWithoutTies) {
  Rng rng(5);
  std::vector<int> labels;
  std::vector<double> scores;
  for (int trial = 0; trial < 50; ++trial) {
    random_case(rng, 60, labels, scores, false);
    std::vector<double> negated(scores);
    for (auto& s : negated) s = -s;
    EXPECT_NEAR(roc_auc(labels, scores) + roc_auc(labels, negated), 1.0, 1e-12);
  }
}

TEST(Evaluate, PerfectScores) {
  const std::vector<int> labels{1, 0, 1, 0, 0};
  const std::vector<double> scores{1, 0, 1, 0, 0};
  const auto r = evaluate_scores(labels, scores, {});
  for (double v : {r.accuracy, r.precision, r.sensitivity, r.f1, r.roc_auc}) EXPECT_EQ(v, 1.0);
  EXPECT_TRUE(r.flags.empty());
  EXPECT_EQ(r.n_samples, 5);
}

TEST(Evaluate, ConstantHalfScore) {
  const std::vector<int> labels{1, 0, 0, 1, 0};
  const std::vector<double> scores(5, 0.5);
  const auto r = evaluate_scores(labels, scores, {});
  EXPECT_EQ(r.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.4);
  EXPECT_DOUBLE_EQ(r.roc_auc, 0.5);
}

TEST(Evaluate, SingleClassFlagsAuc) {
  const std::vector<int> labels{0, 0, 0};
  const std::vector<double> scores{0.1, 0.2, 0.3};
  const auto r = evaluate_scores(labels, scores, {});
  EXPECT_EQ(r.roc_auc, 0.0);
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "roc_auc"), r.flags.end());
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "precision"), r.flags.end());
  EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "f1"), r.flags.end());
}

TEST(Evaluate, PerPatientMeanProbability) {
  const std::vector<int> labels{1, 1, 0, 0, 0};
  const std::vector<double> scores{0.6, 0.4, 0.1, 0.3, 0.7};
  const std::vector<std::string> ids{"A", "A", "B", "B", "C"};
  const auto r = evaluate_scores(labels, scores, ids, 0.5, Aggregate::PerPatientMeanProb);
  EXPECT_DOUBLE_EQ(r.per_patient.at("A"), 0.5);
  EXPECT_DOUBLE_EQ(r.per_patient.at("B"), 0.2);
  EXPECT_EQ(r.n_samples, 3);
  EXPECT_EQ(r.cm, cm_of(1, 1, 0, 1));
  const auto image = evaluate_scores(labels, scores, ids);
  EXPECT_EQ(image.n_samples, 5);
  EXPECT_TRUE(image.per_patient.empty());
}

TEST(Evaluate, ModelScoresMatchEvaluateSet) {
  nn::HyperParams hp;
  hp.n_blocks = 1;
  hp.convs_per_block = 1;
  hp.filters = 2;
  hp.dense_units = 4;
  nn::Model<float> model(hp, nn::InputShape{1, 6, 6}, 1);
  Rng rng(6);
  std::vector<imgproc::LabeledImage> test;
  for (int i = 0; i < 12; ++i) {
    imgproc::ThermalImage img(6, 6, 0.0F, true);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    test.push_back({img, i % 3 == 0 ? 1 : 0, "P" + std::to_string(i / 2)});
  }
  const auto r = evaluate(model, test, 0.5, Aggregate::PerPatientMeanProb);
  const auto probs = nn::evaluate_set(model, test).sick_probability;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (const auto& t : test) {
    labels.push_back(t.label);
    ids.push_back(t.patient_id);
  }
  const auto expected = evaluate_scores(labels, probs, ids, 0.5, Aggregate::PerPatientMeanProb);
  EXPECT_EQ(r.cm, expected.cm);
  EXPECT_EQ(r.per_patient, expected.per_patient);
  EXPECT_EQ(r.n_samples, 6);
}

TEST(SelectBest, Examples) {
  const std::vector<MetricsReport> a{report(0.90, 0.5), report(0.92, 0.5), report(0.91, 0.5)};
  EXPECT_EQ(select_best(a), 1U);
  const std::vector<MetricsReport> b{report(0.9, 0.85), report(0.9, 0.92)};
  EXPECT_EQ(select_best(b), 1U);
  const std::vector<MetricsReport> c(4, report(0.7, 0.7));
  EXPECT_EQ(select_best(c), 0U);
  EXPECT_EQ(code_of([] { select_best({}); }), Errc::EmptyInput);
}

TEST(SelectBest, PermutationCovariant) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<MetricsReport> reports;
    const std::size_t n = 2 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values force ties on both keys.
      reports.push_back(report(static_cast<double>(rng.below(3)) / 2, static_cast<double>(rng.below(3)) / 2));
      reports.back().model_id = std::to_string(i);
    }
    const MetricsReport winner = reports[select_best(reports)];
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<MetricsReport> shuffled;
    for (std::size_t i : perm) shuffled.push_back(reports[i]);
    const MetricsReport& picked = shuffled[select_best(shuffled)];
    EXPECT_EQ(picked.f1, winner.f1);
    EXPECT_EQ(picked.sensitivity, winner.sensitivity);
    // Among equal keys the earliest position wins.
    for (std::size_t i = 0; i < n; ++i) {
      if (shuffled[i].f1 == winner.f1 && shuffled[i].sensitivity == winner.sensitivity) {
        EXPECT_EQ(shuffled[i].model_id, picked.model_id);
        break;
      }
    }
  }
}

TEST(Serialization, CsvRowMatchesHeader) {
  const std::vector<int> labels{1, 0, 0};
  const std::vector<double> scores{0.9, 0.8, 0.1};
  auto r = evaluate_scores(labels, scores, {});
  r.model_id = "m0";
  EXPECT_EQ(csv_header(), "model_id,accuracy,f1,precision,sensitivity,roc_auc,n,threshold,aggregate,flags");
  EXPECT_EQ(csv_row(r), "m0,0.666667,0.666667,0.500000,1.000000,1.000000,3,0.500000,per_image,");
  const auto j = to_json(r);
  EXPECT_NE(j.find("\"model_id\":\"m0\""), std::string::npos);
}

TEST(Serialization, FlagsJoinedWithSemicolons) {
  const std::vector<int> labels{0, 0};
  const std::vector<double> scores{0.1, 0.2};
  const auto row = csv_row(evaluate_scores(labels, scores, {}));
  EXPECT_EQ(row.substr(row.rfind(',') + 1), "precision;sensitivity;f1;roc_auc");
}

TEST(Serialization, AggregateNames) {
  EXPECT_EQ(parse_aggregate(to_string(Aggregate::PerPatientMeanProb)), Aggregate::PerPatientMeanProb);
  EXPECT_EQ(parse_aggregate("per_image"), Aggregate::PerImage);
  EXPECT_THROW(parse_aggregate("per_breast"), Error);
}
