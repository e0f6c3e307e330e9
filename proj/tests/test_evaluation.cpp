#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "gscls/classifier.hpp"
#include "gscls/error.hpp"
#include "gscls/evaluation.hpp"
#include "gscls/rng.hpp"
#include "oracles.hpp"

using namespace gscls;

namespace {

const std::vector<std::string> kThree{"a", "b", "c"};

std::vector<std::vector<Real>> one_hot_rows(std::span<const std::size_t> labels, std::size_t k,
                                            Real confidence = 1.0) {
  std::vector<std::vector<Real>> rows;
  for (std::size_t label : labels) {
    std::vector<Real> row(k, (1.0 - confidence) / static_cast<Real>(k - 1));
    row[label] = confidence;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TEST_CASE("oracle predictions produce identity matrices and perfect scores") {
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 2};
  const EvalReport report = build_report(kThree, labels, one_hot_rows(labels, 3));

  CHECK(report.overall_accuracy == doctest::Approx(1.0));
  CHECK(report.mean_class_accuracy == doctest::Approx(1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(report.prob_matrix[i * 3 + j] == doctest::Approx(i == j ? 1.0 : 0.0));
    }
    CHECK(report.per_class_correct_prob[i] == doctest::Approx(1.0));
  }
  // Confusion rows sum to per-class counts.
  CHECK(report.confusion[0 * 3 + 0] == 2);
  CHECK(report.confusion[1 * 3 + 1] == 2);
  CHECK(report.confusion[2 * 3 + 2] == 3);
}

TEST_CASE("uniform predictions score near 1/k") {
  std::vector<std::size_t> labels;
  std::vector<std::vector<Real>> rows;
  Rng rng(3);
  const std::size_t k = 20;
  std::vector<std::string> classes;
  for (std::size_t i = 0; i < k; ++i) classes.push_back("c" + std::to_string(i));
  for (int i = 0; i < 400; ++i) {
    labels.push_back(rng.below(k));
    // Near-uniform rows with tiny jitter so argmax is arbitrary but valid.
    std::vector<Real> row(k, 1.0 / static_cast<Real>(k));
    const std::size_t bump = rng.below(k);
    row[bump] += 1e-9;
    for (Real& v : row) v /= 1.0 + 1e-9;
    rows.push_back(std::move(row));
  }
  const EvalReport report = build_report(classes, labels, rows);
  for (std::size_t i = 0; i < k; ++i) {
    if (report.per_class_correct_prob[i] > 0) {  // class present in the draw
      CHECK(report.per_class_correct_prob[i] == doctest::Approx(0.05).epsilon(1e-3));
    }
  }
  CHECK(report.overall_accuracy < 0.15);
}

TEST_CASE("mAcc averages recalls while OA weights by count") {
  // Class a: 8 items, all correct. Class b: 2 items, none correct.
  std::vector<std::size_t> labels(10, 0);
  labels[8] = labels[9] = 1;
  auto rows = one_hot_rows(labels, 2);
  rows[8] = {0.9, 0.1};  // true b predicted a
  rows[9] = {0.9, 0.1};
  const EvalReport report = build_report({"a", "b"}, labels, rows);
  CHECK(report.overall_accuracy == doctest::Approx(0.8));
  CHECK(report.mean_class_accuracy == doctest::Approx(0.5));
  CHECK(report.confusion[1 * 2 + 0] == 2);
}

TEST_CASE("prob_matrix rows are stochastic within 1e-6") {
  Rng rng(7);
  std::vector<std::size_t> labels;
  std::vector<std::vector<Real>> rows;
  for (int i = 0; i < 60; ++i) {
    labels.push_back(rng.below(3));
    std::vector<Real> logits(3);
    for (Real& v : logits) v = rng.uniform(-3, 3);
    rows.push_back(softmax(logits));
  }
  const EvalReport report = build_report(kThree, labels, rows);
  for (std::size_t i = 0; i < 3; ++i) {
    Real total = 0;
    for (std::size_t j = 0; j < 3; ++j) total += report.prob_matrix[i * 3 + j];
    CHECK(std::abs(total - 1.0) < 1e-6);
    CHECK(report.per_class_correct_prob[i] ==
          doctest::Approx(report.prob_matrix[i * 3 + i]).epsilon(1e-12));
  }
}

TEST_CASE("empty test sets and unpopulated classes are rejected") {
  CHECK_THROWS_AS(build_report(kThree, std::vector<std::size_t>{}, {}), Error);
  const std::vector<std::size_t> partial{0, 1, 0};  // class c has no items
  try {
    build_report(kThree, partial, one_hot_rows(partial, 3));
    FAIL("expected EmptyTestSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTestSet);
  }
}

TEST_CASE("report JSON roundtrip is exact") {
  const std::vector<std::size_t> labels{0, 1, 2, 1, 2, 2};
  Rng rng(11);
  std::vector<std::vector<Real>> rows;
  for (std::size_t label : labels) {
    (void)label;
    std::vector<Real> logits(3);
    for (Real& v : logits) v = rng.uniform(-2, 2);
    rows.push_back(softmax(logits));
  }
  const EvalReport report = build_report(kThree, labels, rows);
  const EvalReport back = report_from_json(report_to_json(report));
  CHECK(back.classes == report.classes);
  CHECK(back.overall_accuracy == report.overall_accuracy);
  CHECK(back.mean_class_accuracy == report.mean_class_accuracy);
  CHECK(back.confusion == report.confusion);
  CHECK(back.prob_matrix == report.prob_matrix);
  CHECK(back.per_class_correct_prob == report.per_class_correct_prob);
}

TEST_CASE("prob matrix CSV has a header and k data rows") {
  const std::vector<std::size_t> labels{0, 1, 2};
  const EvalReport report = build_report(kThree, labels, one_hot_rows(labels, 3, 0.7));
  const std::string csv = prob_matrix_csv(report);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 4);
  CHECK(csv.find("a,b,c") != std::string::npos);
  CHECK(csv.find("0.700000") != std::string::npos);
  CHECK(csv.find("0.150000") != std::string::npos);
}

TEST_CASE("identical reports compare with all-zero deltas") {
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2};
  const EvalReport report = build_report(kThree, labels, one_hot_rows(labels, 3, 0.8));
  std::map<FeatureMode, EvalReport> reports;
  reports[FeatureMode::p] = report;
  reports[FeatureMode::posq] = report;
  const std::string text = compare_modes_text(reports);
  CHECK(text.find("+0.0000") != std::string::npos);
  CHECK(text.find("posq") != std::string::npos);
  const std::string json = compare_modes_json(reports);
  CHECK(json.find("\"delta_overall_accuracy\": 0.0") != std::string::npos);
}

TEST_CASE("compare requires the p baseline and consistent class sets") {
  const std::vector<std::size_t> labels{0, 1, 2};
  const EvalReport report = build_report(kThree, labels, one_hot_rows(labels, 3));
  std::map<FeatureMode, EvalReport> no_baseline;
  no_baseline[FeatureMode::posq] = report;
  CHECK_THROWS_AS(compare_modes_text(no_baseline), Error);

  EvalReport other = report;
  other.classes = {"a", "b", "zzz"};
  std::map<FeatureMode, EvalReport> mismatched;
  mismatched[FeatureMode::p] = report;
  mismatched[FeatureMode::posq] = other;
  try {
    compare_modes_text(mismatched);
    FAIL("expected InconsistentClassSets");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InconsistentClassSets);
  }
}

TEST_CASE("evaluate runs a real model and is thread-count invariant") {
  Rng rng(13);
  std::vector<LabeledCloud> items;
  for (int i = 0; i < 18; ++i) {
    LabeledCloud item;
    item.cloud = oracles::random_cloud(rng, 40);
    item.label = i % 3;
    item.id = "c" + std::to_string(item.label) + "/obj_" + std::to_string(i);
    items.push_back(std::move(item));
  }
  ClassifierModel model = build_model(tiny_preset(4, 3), 17);

  setenv("GSCLS_THREADS", "1", 1);
  const EvalReport serial = evaluate(model, items, kThree, FeatureMode::po, 16);
  setenv("GSCLS_THREADS", "4", 1);
  const EvalReport parallel = evaluate(model, items, kThree, FeatureMode::po, 16);
  unsetenv("GSCLS_THREADS");

  CHECK(serial.prob_matrix == parallel.prob_matrix);
  CHECK(serial.confusion == parallel.confusion);
  CHECK(serial.overall_accuracy == parallel.overall_accuracy);

  // Determinism across repeat calls, too.
  const EvalReport again = evaluate(model, items, kThree, FeatureMode::po, 16);
  CHECK(again.prob_matrix == serial.prob_matrix);
}

TEST_CASE("evaluate rejects mode/model channel mismatches and empty input") {
  Rng rng(19);
  std::vector<LabeledCloud> items;
  LabeledCloud item;
  item.cloud = oracles::random_cloud(rng, 10);
  item.label = 0;
  item.id = "a/x";
  items.push_back(item);
  ClassifierModel model = build_model(tiny_preset(3, 3), 23);
  try {
    evaluate(model, items, kThree, FeatureMode::posq, 8);
    FAIL("expected ChannelMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ChannelMismatch);
  }
  try {
    evaluate(model, {}, kThree, FeatureMode::p, 8);
    FAIL("expected EmptyTestSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTestSet);
  }
}
