#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gscls/classifier.hpp"
#include "gscls/datasets.hpp"
#include "gscls/geometry.hpp"
#include "gscls/real.hpp"

namespace gscls {

struct EvalReport {
  std::vector<std::string> classes;             // k names
  Real overall_accuracy = 0;                    // trace(confusion) / total
  Real mean_class_accuracy = 0;                 // unweighted mean of class recalls
  std::vector<std::size_t> confusion;           // k x k counts, rows = true class
  std::vector<Real> prob_matrix;                // k x k mean predicted probabilities
  std::vector<Real> per_class_correct_prob;     // k, == prob_matrix diagonal

  std::size_t num_classes() const { return classes.size(); }
};

// Aggregates per-item probability rows (argmax decides the confusion entry).
EvalReport build_report(const std::vector<std::string>& classes,
                        std::span<const std::size_t> labels,
                        const std::vector<std::vector<Real>>& probabilities);

// Runs the model over the test items: per object, farthest-point subset of
// `sample_points` seeded by the object id (identical across modes), then
// normalize, assemble features, and predict. Parallel across items with
// deterministic aggregation; GSCLS_THREADS caps the worker count.
EvalReport evaluate(ClassifierModel& model, const std::vector<LabeledCloud>& test_items,
                    const std::vector<std::string>& classes, FeatureMode mode,
                    std::size_t sample_points);

// OA/mAcc deltas vs mode p plus per-class correct-probability deltas.
std::string compare_modes_text(const std::map<FeatureMode, EvalReport>& reports);
std::string compare_modes_json(const std::map<FeatureMode, EvalReport>& reports);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_text(const EvalReport& report);
std::string prob_matrix_csv(const EvalReport& report);

}  // namespace gscls
