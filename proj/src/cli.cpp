#include "gscls/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gscls/classifier.hpp"
#include "gscls/datasets.hpp"
#include "gscls/embedding.hpp"
#include "gscls/error.hpp"
#include "gscls/evaluation.hpp"
#include "gscls/geometry.hpp"
#include "gscls/gs_ply.hpp"
#include "gscls/rng.hpp"
#include "gscls/sampling.hpp"
#include "gscls/svg.hpp"

namespace fs = std::filesystem;

namespace gscls {

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(content.data(), static_cast<std::streamsize>(content.size()))) {
    throw Error(ErrorCode::IoError, fmt::format("cannot write {}", path.string()));
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::UnreadableFile, path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Real median(std::vector<Real> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2;
}

struct SplitData {
  std::vector<std::string> classes;
  std::vector<TrainItem> train_items;
  std::vector<LabeledCloud> test_items;
};

// Loads the directory dataset, splits it, and activates the needed clouds.
SplitData load_split(const std::string& data_dir, Real test_fraction, std::uint64_t seed,
                     bool need_train, bool need_test) {
  const DatasetManifest manifest = split(load_dataset(data_dir), test_fraction, seed);
  SplitData out;
  out.classes = manifest.classes;
  for (const ManifestItem& item : manifest.items) {
    if (item.split == "train" && need_train) {
      out.train_items.push_back(
          {activate(read_ply_file(item.path)), item.class_index, item.id});
    } else if (item.split == "test" && need_test) {
      out.test_items.push_back(
          {activate(read_ply_file(item.path)), item.class_index, item.id});
    }
  }
  return out;
}

// Per-object pipeline shared by eval and embed: id-seeded point subset, then
// normalization and feature assembly.
FeatureMatrix features_for_item(const LabeledCloud& item, FeatureMode mode,
                                std::size_t sample_points) {
  const SampleIndices idx =
      farthest_point_sample(item.cloud.positions, sample_points,
                            derive_seed(detail::fnv1a64(item.id.c_str()), "eval-fps"));
  const auto [normalized, record] = normalize_cloud(gather(item.cloud, idx));
  return assemble_features(normalized, mode);
}

void cmd_inspect(const std::string& path, bool as_json) {
  const RawGaussianCloud raw = read_ply_file(path);
  const GaussianCloud cloud = activate(raw);
  const SurfaceDescriptor stats = anisotropy_stats(cloud);

  auto min_max_mean = [](const std::vector<Real>& values) {
    Real lo = values[0], hi = values[0], mean = 0;
    for (Real v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean += v;
    }
    return std::array<Real, 3>{lo, hi, mean / static_cast<Real>(values.size())};
  };
  const auto opacity = min_max_mean(cloud.opacity);
  const auto scale = min_max_mean(cloud.scale);

  if (as_json) {
    nlohmann::ordered_json doc;
    doc["path"] = path;
    doc["points"] = raw.size();
    doc["sh_degree"] = raw.sh_degree();
    doc["payload_width"] = cloud.payload_width;
    doc["opacity"] = {{"min", opacity[0]}, {"max", opacity[1]}, {"mean", opacity[2]}};
    doc["scale"] = {{"min", scale[0]}, {"max", scale[1]}, {"mean", scale[2]}};
    doc["median_elongation"] = median(stats.elongation);
    doc["median_flatness"] = median(stats.flatness);
    doc["elongation_hist"] = stats.elongation_hist;
    doc["flatness_hist"] = stats.flatness_hist;
    std::cout << doc.dump(2) << "\n";
    return;
  }

  std::cout << fmt::format("file: {}\n", path);
  std::cout << fmt::format("points: {}\n", raw.size());
  std::cout << fmt::format("sh_degree: {}\n", raw.sh_degree());
  std::cout << fmt::format("payload_width: {}\n", cloud.payload_width);
  std::cout << fmt::format("opacity: min {:.4f}  max {:.4f}  mean {:.4f}\n", opacity[0],
                           opacity[1], opacity[2]);
  std::cout << fmt::format("scale: min {:.5f}  max {:.5f}  mean {:.5f}\n", scale[0], scale[1],
                           scale[2]);
  std::cout << fmt::format("median elongation: {:.3f}\n", median(stats.elongation));
  std::cout << fmt::format("median flatness: {:.3f}\n", median(stats.flatness));
  auto hist_line = [](const auto& hist) {
    std::string out;
    for (std::size_t v : hist) out += fmt::format("{} ", v);
    out.pop_back();
    return out;
  };
  std::cout << "elongation_hist: " << hist_line(stats.elongation_hist) << "\n";
  std::cout << "flatness_hist: " << hist_line(stats.flatness_hist) << "\n";
}

void cmd_synth(const std::string& out_dir, std::size_t objects_per_class, std::size_t anchors,
               Real jitter, std::uint64_t seed) {
  SynthSpec spec;
  spec.objects_per_class = objects_per_class;
  spec.anchors_per_object = anchors;
  spec.jitter_sigma = jitter;
  spec.seed = derive_seed(seed, "synth");
  const SynthDataset dataset = synth_generate(spec);
  synth_persist(dataset, out_dir);
  std::cout << fmt::format("wrote {} objects across {} classes under {}\n", dataset.items.size(),
                           dataset.classes.size(), out_dir);
}

void cmd_train(const std::string& data_dir, FeatureMode mode, const std::string& preset,
               std::size_t points, std::size_t epochs, std::size_t batch, Real lr,
               Real test_fraction, std::uint64_t seed, const std::string& out_dir) {
  SplitData data = load_split(data_dir, test_fraction, seed, true, false);

  ClassifierConfig config = preset == "tiny"
                                ? tiny_preset(channel_count(mode), data.classes.size())
                                : default_preset(channel_count(mode), data.classes.size());
  ClassifierModel model = build_model(config, derive_seed(seed, "init"));

  TrainConfig train_config;
  train_config.epochs = epochs;
  train_config.batch_size = batch;
  train_config.sample_points = points;
  train_config.mode = mode;
  train_config.lr = lr;
  train_config.seed = derive_seed(seed, "train");
  const TrainingLog log = train(model, data.train_items, train_config);

  fs::create_directories(out_dir);
  const std::string mode_name = feature_mode_name(mode);
  save_model(model, (fs::path(out_dir) / fmt::format("model_{}.ckpt", mode_name)).string());
  write_text_file(fs::path(out_dir) / fmt::format("train_log_{}.jsonl", mode_name),
                  log.to_jsonl());
  std::cout << fmt::format("trained mode {} for {} epochs: final loss {:.4f}, train acc {:.4f}\n",
                           mode_name, epochs, log.epochs.back().loss,
                           log.epochs.back().train_accuracy);
}

void cmd_eval(const std::string& data_dir, const std::string& model_path, FeatureMode mode,
              std::size_t points, Real test_fraction, std::uint64_t seed,
              const std::string& out_dir) {
  SplitData data = load_split(data_dir, test_fraction, seed, false, true);
  ClassifierModel model = load_model(model_path);
  const EvalReport report = evaluate(model, data.test_items, data.classes, mode, points);

  fs::create_directories(out_dir);
  const std::string mode_name = feature_mode_name(mode);
  write_text_file(fs::path(out_dir) / fmt::format("report_{}.json", mode_name),
                  report_to_json(report));
  write_text_file(fs::path(out_dir) / fmt::format("report_{}.txt", mode_name),
                  report_to_text(report));
  write_text_file(fs::path(out_dir) / fmt::format("prob_matrix_{}.csv", mode_name),
                  prob_matrix_csv(report));
  std::cout << report_to_text(report);
}

void cmd_compare(const std::vector<std::string>& mode_reports, const std::string& out_dir) {
  std::map<FeatureMode, EvalReport> reports;
  for (const std::string& pair : mode_reports) {
    const std::size_t eq = pair.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("--report expects MODE=PATH, got \"{}\"", pair));
    }
    reports[parse_feature_mode(pair.substr(0, eq))] =
        report_from_json(read_text_file(pair.substr(eq + 1)));
  }
  const std::string text = compare_modes_text(reports);
  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "compare.txt", text);
  write_text_file(fs::path(out_dir) / "compare.json", compare_modes_json(reports));
  std::cout << text;
}

void cmd_embed(const std::string& data_dir, const std::string& model_path, FeatureMode mode,
               std::size_t points, Real test_fraction, std::uint64_t seed, Real perplexity,
               std::size_t iterations, const std::string& out_dir) {
  SplitData data = load_split(data_dir, test_fraction, seed, false, true);
  ClassifierModel model = load_model(model_path);

  const std::size_t n = data.test_items.size();
  const std::size_t width = model.global_feature_width();
  std::vector<Real> X;
  X.reserve(n * width);
  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (const LabeledCloud& item : data.test_items) {
    const std::vector<Real> feature =
        global_feature(model, features_for_item(item, mode, points));
    X.insert(X.end(), feature.begin(), feature.end());
    labels.push_back(item.label);
  }

  EmbeddingConfig config;
  config.perplexity = perplexity;
  config.iterations = iterations;
  config.seed = derive_seed(seed, "embed");
  const TsneResult result = tsne(X, n, width, config);
  const Real score = silhouette(result.embedding, n, 2, labels);

  fs::create_directories(out_dir);
  const std::string mode_name = feature_mode_name(mode);
  write_text_file(fs::path(out_dir) / fmt::format("embedding_{}.csv", mode_name),
                  embedding_csv(result.embedding, labels, data.classes));
  nlohmann::ordered_json summary;
  summary["mode"] = mode_name;
  summary["points"] = n;
  summary["silhouette"] = score;
  summary["kl_initial"] = result.kl_trace.front();
  summary["kl_final"] = result.kl_trace.back();
  write_text_file(fs::path(out_dir) / fmt::format("embedding_summary_{}.json", mode_name),
                  summary.dump(2) + "\n");
  std::cout << fmt::format("embedded {} test objects (mode {}): silhouette {:.4f}, "
                           "KL {:.4f} -> {:.4f}\n",
                           n, mode_name, score, result.kl_trace.front(), result.kl_trace.back());
}

void cmd_plot(const std::string& embedding_csv_path, const std::string& report_json_path,
              const std::string& title, const std::string& out_file) {
  if (embedding_csv_path.empty() == report_json_path.empty()) {
    throw Error(ErrorCode::InvalidArgument, "plot needs exactly one of --embedding or --report");
  }

  if (!report_json_path.empty()) {
    const EvalReport report = report_from_json(read_text_file(report_json_path));
    write_text_file(out_file,
                    svg_heatmap(report.prob_matrix, report.classes,
                                title.empty() ? "mean class probability" : title));
    return;
  }

  // Parse the embedding CSV (x,y,label,class).
  std::istringstream in(read_text_file(embedding_csv_path));
  std::string line;
  if (!std::getline(in, line) || line != "x,y,label,class") {
    throw Error(ErrorCode::IoError,
                fmt::format("{} is not an embedding CSV", embedding_csv_path));
  }
  std::vector<Real> points;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string x_text, y_text, label_text, class_name;
    if (!std::getline(fields, x_text, ',') || !std::getline(fields, y_text, ',') ||
        !std::getline(fields, label_text, ',') || !std::getline(fields, class_name)) {
      throw Error(ErrorCode::IoError, fmt::format("bad CSV row \"{}\"", line));
    }
    auto parse_real = [&](const std::string& text) {
      double value = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::IoError, fmt::format("bad number \"{}\" in CSV", text));
      }
      return static_cast<Real>(value);
    };
    points.push_back(parse_real(x_text));
    points.push_back(parse_real(y_text));
    std::size_t label = 0;
    auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(),
                                     label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size()) {
      throw Error(ErrorCode::IoError, fmt::format("bad label \"{}\" in CSV", label_text));
    }
    labels.push_back(label);
    if (label >= class_names.size()) class_names.resize(label + 1);
    class_names[label] = class_name;
  }
  write_text_file(out_file, svg_scatter(points, labels, class_names,
                                        title.empty() ? "global feature embedding" : title));
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian-splatting point cloud classification toolkit"};
  app.require_subcommand(1);

  // Shared option storage; each subcommand binds the subset it uses.
  std::string data_dir, model_path, out_path, preset = "default", mode_name = "p";
  std::string inspect_path, embedding_path, report_path, title;
  std::vector<std::string> mode_reports;
  bool as_json = false;
  std::size_t points = 1024, epochs = 30, batch = 32, objects_per_class = 100, anchors = 512;
  std::size_t iterations = 1000;
  Real lr = 1e-3, test_fraction = 0.2, jitter = 0.01, perplexity = 30;
  std::uint64_t seed = 0;

  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a GS PLY file");
  inspect->add_option("path", inspect_path, "PLY file")->required();
  inspect->add_flag("--json", as_json, "emit JSON instead of text");
  inspect->callback([&] { cmd_inspect(inspect_path, as_json); });

  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic ambiguity benchmark");
  synth->add_option("--out", out_path, "output dataset directory")->required();
  synth->add_option("--objects-per-class", objects_per_class, "objects per class");
  synth->add_option("--anchors", anchors, "Gaussians per object");
  synth->add_option("--jitter", jitter, "position jitter sigma");
  synth->add_option("--seed", seed, "master seed");
  synth->callback([&] { cmd_synth(out_path, objects_per_class, anchors, jitter, seed); });

  CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier on a dataset directory");
  train_cmd->add_option("--data", data_dir, "dataset root")->required();
  train_cmd->add_option("--mode", mode_name, "feature mode: p, po, psq, posq")->required();
  train_cmd->add_option("--out", out_path, "output directory")->required();
  train_cmd->add_option("--points", points, "points sampled per object");
  train_cmd->add_option("--preset", preset, "model preset: default or tiny")
      ->check(CLI::IsMember({"default", "tiny"}));
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch", batch, "objects per batch");
  train_cmd->add_option("--lr", lr, "Adam learning rate");
  train_cmd->add_option("--test-fraction", test_fraction, "held-out fraction per class");
  train_cmd->add_option("--seed", seed, "master seed");
  train_cmd->callback([&] {
    cmd_train(data_dir, parse_feature_mode(mode_name), preset, points, epochs, batch, lr,
              test_fraction, seed, out_path);
  });

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on the test split");
  eval_cmd->add_option("--data", data_dir, "dataset root")->required();
  eval_cmd->add_option("--model", model_path, "model checkpoint")->required();
  eval_cmd->add_option("--mode", mode_name, "feature mode: p, po, psq, posq")->required();
  eval_cmd->add_option("--out", out_path, "output directory")->required();
  eval_cmd->add_option("--points", points, "points sampled per object");
  eval_cmd->add_option("--test-fraction", test_fraction, "held-out fraction per class");
  eval_cmd->add_option("--seed", seed, "master seed (must match training for the same split)");
  eval_cmd->callback([&] {
    cmd_eval(data_dir, model_path, parse_feature_mode(mode_name), points, test_fraction, seed,
             out_path);
  });

  CLI::App* compare = app.add_subcommand("compare", "Delta table across mode reports");
  compare->add_option("--report", mode_reports, "MODE=report.json (repeatable)")->required();
  compare->add_option("--out", out_path, "output directory")->required();
  compare->callback([&] { cmd_compare(mode_reports, out_path); });

  CLI::App* embed = app.add_subcommand("embed", "t-SNE embedding of test global features");
  embed->add_option("--data", data_dir, "dataset root")->required();
  embed->add_option("--model", model_path, "model checkpoint")->required();
  embed->add_option("--mode", mode_name, "feature mode: p, po, psq, posq")->required();
  embed->add_option("--out", out_path, "output directory")->required();
  embed->add_option("--points", points, "points sampled per object");
  embed->add_option("--test-fraction", test_fraction, "held-out fraction per class");
  embed->add_option("--seed", seed, "master seed (must match training for the same split)");
  embed->add_option("--perplexity", perplexity, "t-SNE perplexity");
  embed->add_option("--iterations", iterations, "t-SNE iterations");
  embed->callback([&] {
    cmd_embed(data_dir, model_path, parse_feature_mode(mode_name), points, test_fraction, seed,
              perplexity, iterations, out_path);
  });

  CLI::App* plot = app.add_subcommand("plot", "Render an embedding scatter or heatmap SVG");
  plot->add_option("--embedding", embedding_path, "embedding CSV");
  plot->add_option("--report", report_path, "eval report JSON (heatmap)");
  plot->add_option("--title", title, "plot title");
  plot->add_option("--out", out_path, "output SVG file")->required();
  plot->callback([&] { cmd_plot(embedding_path, report_path, title, out_path); });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gscls
