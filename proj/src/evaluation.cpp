#include "gscls/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <thread>

#include <json.hpp>

#include "gscls/error.hpp"
#include "gscls/rng.hpp"
#include "gscls/sampling.hpp"

namespace gscls {

namespace {

std::size_t worker_count(std::size_t items) {
  std::size_t threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GSCLS_THREADS")) {
    std::size_t cap = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::string_view(env).size(), cap);
    if (ec == std::errc() && cap >= 1) threads = cap;
  }
  return std::max<std::size_t>(1, std::min(threads, items));
}

}  // namespace

EvalReport build_report(const std::vector<std::string>& classes,
                        std::span<const std::size_t> labels,
                        const std::vector<std::vector<Real>>& probabilities) {
  const std::size_t k = classes.size();
  if (labels.empty()) {
    throw Error(ErrorCode::EmptyTestSet, "no test items to score");
  }
  if (labels.size() != probabilities.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} labels for {} probability rows", labels.size(),
                            probabilities.size()));
  }

  EvalReport report;
  report.classes = classes;
  report.confusion.assign(k * k, 0);
  report.prob_matrix.assign(k * k, Real(0));
  report.per_class_correct_prob.assign(k, Real(0));

  std::vector<std::size_t> per_class_count(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t truth = labels[i];
    const std::vector<Real>& row = probabilities[i];
    if (truth >= k) {
      throw Error(ErrorCode::InvalidLabel,
                  fmt::format("label {} out of range for {} classes", truth, k));
    }
    if (row.size() != k) {
      throw Error(ErrorCode::ShapeMismatch,
                  fmt::format("probability row {} has {} entries, expected {}", i, row.size(), k));
    }
    ++per_class_count[truth];
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    ++report.confusion[truth * k + best];
    for (std::size_t j = 0; j < k; ++j) report.prob_matrix[truth * k + j] += row[j];
  }

  std::size_t trace = 0;
  Real recall_sum = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (per_class_count[i] == 0) {
      throw Error(ErrorCode::EmptyTestSet,
                  fmt::format("class \"{}\" has no test items", classes[i]));
    }
    for (std::size_t j = 0; j < k; ++j) {
      report.prob_matrix[i * k + j] /= static_cast<Real>(per_class_count[i]);
    }
    report.per_class_correct_prob[i] = report.prob_matrix[i * k + i];
    trace += report.confusion[i * k + i];
    recall_sum += static_cast<Real>(report.confusion[i * k + i]) /
                  static_cast<Real>(per_class_count[i]);
  }
  report.overall_accuracy = static_cast<Real>(trace) / static_cast<Real>(labels.size());
  report.mean_class_accuracy = recall_sum / static_cast<Real>(k);
  return report;
}

EvalReport evaluate(ClassifierModel& model, const std::vector<LabeledCloud>& test_items,
                    const std::vector<std::string>& classes, FeatureMode mode,
                    std::size_t sample_points) {
  if (channel_count(mode) != model.config.in_channels) {
    throw Error(ErrorCode::ChannelMismatch,
                fmt::format("mode {} has {} channels, model expects {}", feature_mode_name(mode),
                            channel_count(mode), model.config.in_channels));
  }
  if (test_items.empty()) {
    throw Error(ErrorCode::EmptyTestSet, "no test items to score");
  }

  model.training = false;
  std::vector<std::vector<Real>> probabilities(test_items.size());
  std::vector<std::size_t> labels(test_items.size());

  auto score_item = [&](ClassifierModel& worker_model, std::size_t i) {
    const LabeledCloud& item = test_items[i];
    // Seeded purely by the object id, so every mode sees the same subset.
    const SampleIndices idx = farthest_point_sample(
        item.cloud.positions, sample_points, derive_seed(detail::fnv1a64(item.id.c_str()),
                                                         "eval-fps"));
    const auto [normalized, record] = normalize_cloud(gather(item.cloud, idx));
    probabilities[i] = predict(worker_model, assemble_features(normalized, mode));
    labels[i] = item.label;
  };

  const std::size_t threads = worker_count(test_items.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < test_items.size(); ++i) score_item(model, i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        // Per-worker copy: parameters are shared read-only, the mode flag and
        // batchnorm stat vectors are private to the copy.
        ClassifierModel worker_model = model;
        for (std::size_t i = w; i < test_items.size(); i += threads) {
          score_item(worker_model, i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  return build_report(classes, labels, probabilities);
}

std::string report_to_json(const EvalReport& report) {
  const std::size_t k = report.num_classes();
  nlohmann::ordered_json doc;
  doc["classes"] = report.classes;
  doc["overall_accuracy"] = report.overall_accuracy;
  doc["mean_class_accuracy"] = report.mean_class_accuracy;
  auto rows = [&](const auto& flat) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < k; ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (std::size_t j = 0; j < k; ++j) row.push_back(flat[i * k + j]);
      out.push_back(std::move(row));
    }
    return out;
  };
  doc["confusion"] = rows(report.confusion);
  doc["prob_matrix"] = rows(report.prob_matrix);
  doc["per_class_correct_prob"] = report.per_class_correct_prob;
  return doc.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport report;
  try {
    const auto doc = nlohmann::json::parse(text);
    report.classes = doc.at("classes").get<std::vector<std::string>>();
    report.overall_accuracy = doc.at("overall_accuracy").get<Real>();
    report.mean_class_accuracy = doc.at("mean_class_accuracy").get<Real>();
    const std::size_t k = report.classes.size();
    report.confusion.reserve(k * k);
    for (const auto& row : doc.at("confusion")) {
      for (const auto& v : row) report.confusion.push_back(v.get<std::size_t>());
    }
    report.prob_matrix.reserve(k * k);
    for (const auto& row : doc.at("prob_matrix")) {
      for (const auto& v : row) report.prob_matrix.push_back(v.get<Real>());
    }
    report.per_class_correct_prob = doc.at("per_class_correct_prob").get<std::vector<Real>>();
    if (report.confusion.size() != k * k || report.prob_matrix.size() != k * k ||
        report.per_class_correct_prob.size() != k) {
      throw Error(ErrorCode::ShapeMismatch, "report matrices do not match the class count");
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, fmt::format("malformed report JSON: {}", e.what()));
  }
  return report;
}

std::string report_to_text(const EvalReport& report) {
  const std::size_t k = report.num_classes();
  std::size_t name_width = 5;
  for (const std::string& name : report.classes) name_width = std::max(name_width, name.size());

  std::string out;
  out += fmt::format("overall accuracy   {:.4f}\n", report.overall_accuracy);
  out += fmt::format("mean class accuracy {:.4f}\n\n", report.mean_class_accuracy);
  out += fmt::format("{:<{}}  {:>8}  confusion (rows = true class)\n", "class", name_width,
                     "correct");
  for (std::size_t i = 0; i < k; ++i) {
    out += fmt::format("{:<{}}  {:>8.4f}  ", report.classes[i], name_width,
                       report.per_class_correct_prob[i]);
    for (std::size_t j = 0; j < k; ++j) {
      out += fmt::format("{:>6}", report.confusion[i * k + j]);
    }
    out += '\n';
  }
  return out;
}

std::string prob_matrix_csv(const EvalReport& report) {
  const std::size_t k = report.num_classes();
  std::string out = "class";
  for (const std::string& name : report.classes) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < k; ++i) {
    out += report.classes[i];
    for (std::size_t j = 0; j < k; ++j) {
      out += fmt::format(",{:.6f}", report.prob_matrix[i * k + j]);
    }
    out += '\n';
  }
  return out;
}

namespace {

void require_consistent(const std::map<FeatureMode, EvalReport>& reports) {
  if (reports.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no reports to compare");
  }
  if (!reports.contains(FeatureMode::p)) {
    throw Error(ErrorCode::InvalidArgument, "mode comparison needs the p baseline");
  }
  const auto& reference = reports.begin()->second.classes;
  for (const auto& [mode, report] : reports) {
    if (report.classes != reference) {
      throw Error(ErrorCode::InconsistentClassSets,
                  fmt::format("report for mode {} covers a different class set",
                              feature_mode_name(mode)));
    }
  }
}

}  // namespace

std::string compare_modes_text(const std::map<FeatureMode, EvalReport>& reports) {
  require_consistent(reports);
  const EvalReport& base = reports.at(FeatureMode::p);
  const std::size_t k = base.num_classes();

  std::string out = fmt::format("{:<6}{:>10}{:>10}{:>10}{:>10}\n", "mode", "OA", "dOA", "mAcc",
                                "dmAcc");
  for (const auto& [mode, report] : reports) {
    out += fmt::format("{:<6}{:>10.4f}{:>+10.4f}{:>10.4f}{:>+10.4f}\n", feature_mode_name(mode),
                       report.overall_accuracy, report.overall_accuracy - base.overall_accuracy,
                       report.mean_class_accuracy,
                       report.mean_class_accuracy - base.mean_class_accuracy);
  }

  std::size_t name_width = 5;
  for (const std::string& name : base.classes) name_width = std::max(name_width, name.size());
  out += fmt::format("\nper-class correct probability (delta vs p)\n{:<{}}", "class", name_width);
  for (const auto& [mode, report] : reports) {
    out += fmt::format("{:>16}", feature_mode_name(mode));
  }
  out += '\n';
  for (std::size_t i = 0; i < k; ++i) {
    out += fmt::format("{:<{}}", base.classes[i], name_width);
    for (const auto& [mode, report] : reports) {
      out += fmt::format("  {:>6.3f} ({:>+5.2f})", report.per_class_correct_prob[i],
                         report.per_class_correct_prob[i] - base.per_class_correct_prob[i]);
    }
    out += '\n';
  }
  return out;
}

std::string compare_modes_json(const std::map<FeatureMode, EvalReport>& reports) {
  require_consistent(reports);
  const EvalReport& base = reports.at(FeatureMode::p);
  nlohmann::ordered_json doc;
  doc["classes"] = base.classes;
  doc["modes"] = nlohmann::ordered_json::array();
  for (const auto& [mode, report] : reports) {
    nlohmann::ordered_json entry;
    entry["mode"] = feature_mode_name(mode);
    entry["overall_accuracy"] = report.overall_accuracy;
    entry["delta_overall_accuracy"] = report.overall_accuracy - base.overall_accuracy;
    entry["mean_class_accuracy"] = report.mean_class_accuracy;
    entry["delta_mean_class_accuracy"] =
        report.mean_class_accuracy - base.mean_class_accuracy;
    entry["per_class_correct_prob"] = report.per_class_correct_prob;
    nlohmann::ordered_json deltas = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < base.num_classes(); ++i) {
      deltas.push_back(report.per_class_correct_prob[i] - base.per_class_correct_prob[i]);
    }
    entry["delta_per_class_correct_prob"] = std::move(deltas);
    doc["modes"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

}  // namespace gscls
