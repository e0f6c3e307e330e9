#include "gscls/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fmt/format.h>
#include <sstream>

#include "gscls/checkpoint.hpp"
#include "gscls/error.hpp"
#include "gscls/rng.hpp"
#include "gscls/sampling.hpp"

namespace gscls {

namespace {

// He-uniform fan-in bound; every parameter draws from its own named stream so
// identically named parameters match across configs that share a seed.
TensorPtr init_weight(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                      const std::string& name) {
  Rng rng(derive_seed(seed, name.c_str()));
  const Real bound = std::sqrt(Real(6) / static_cast<Real>(fan_in));
  auto w = make_tensor({fan_in, fan_out}, true);
  for (Real& v : w->data) v = rng.uniform(-bound, bound);
  return w;
}

LinearLayer make_layer(std::size_t fan_in, std::size_t fan_out, bool with_bn, std::uint64_t seed,
                       const std::string& prefix) {
  LinearLayer layer;
  layer.weight = init_weight(fan_in, fan_out, seed, prefix + ".weight");
  layer.bias = make_tensor({fan_out}, true);
  layer.has_batchnorm = with_bn;
  if (with_bn) {
    layer.gamma = make_tensor({fan_out}, true);
    std::fill(layer.gamma->data.begin(), layer.gamma->data.end(), Real(1));
    layer.beta = make_tensor({fan_out}, true);
    layer.bn_state.running_mean.assign(fan_out, Real(0));
    layer.bn_state.running_var.assign(fan_out, Real(1));
  }
  return layer;
}

TensorPtr layer_forward(LinearLayer& layer, TensorPtr x, bool training) {
  x = add_bias(matmul(x, layer.weight), layer.bias);
  if (layer.has_batchnorm) {
    x = batchnorm(x, layer.gamma, layer.beta, layer.bn_state, training);
  }
  return relu(x);
}

void append_params(const LinearLayer& layer, std::vector<TensorPtr>& out) {
  out.push_back(layer.weight);
  out.push_back(layer.bias);
  if (layer.has_batchnorm) {
    out.push_back(layer.gamma);
    out.push_back(layer.beta);
  }
}

void check_channels(const ClassifierModel& model, const FeatureMatrix& features) {
  if (features.cols() != model.config.in_channels) {
    throw Error(ErrorCode::ChannelMismatch,
                fmt::format("features carry {} channels, model expects {}", features.cols(),
                            model.config.in_channels));
  }
}

// Shared MLP over all rows followed by the per-object max pool.
TensorPtr pooled_feature(ClassifierModel& model, const FeatureMatrix& features,
                         std::size_t points_per_object) {
  check_channels(model, features);
  if (points_per_object == 0 || features.rows % points_per_object != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} feature rows not divisible by {} points per object",
                            features.rows, points_per_object));
  }
  TensorPtr x = make_tensor({features.rows, features.cols()}, features.data);
  for (LinearLayer& layer : model.shared) {
    x = layer_forward(layer, x, model.training);
  }
  return max_over_points(x, points_per_object);
}

std::string join_widths(const std::vector<std::size_t>& widths) {
  std::string out;
  for (std::size_t w : widths) {
    if (!out.empty()) out += ',';
    out += std::to_string(w);
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("bad width list \"{}\"", text));
    }
    out.push_back(value);
  }
  return out;
}

void store_layer(Checkpoint& ckpt, const LinearLayer& layer, const std::string& prefix) {
  auto put = [&](const std::string& name, const TensorPtr& t) {
    Checkpoint::Entry entry;
    entry.shape = t->shape;
    entry.data.assign(t->data.begin(), t->data.end());
    ckpt.tensors.emplace(prefix + name, std::move(entry));
  };
  put(".weight", layer.weight);
  put(".bias", layer.bias);
  if (layer.has_batchnorm) {
    put(".gamma", layer.gamma);
    put(".beta", layer.beta);
    Checkpoint::Entry mean, var;
    mean.shape = {layer.bn_state.running_mean.size()};
    mean.data.assign(layer.bn_state.running_mean.begin(), layer.bn_state.running_mean.end());
    var.shape = {layer.bn_state.running_var.size()};
    var.data.assign(layer.bn_state.running_var.begin(), layer.bn_state.running_var.end());
    ckpt.tensors.emplace(prefix + ".running_mean", std::move(mean));
    ckpt.tensors.emplace(prefix + ".running_var", std::move(var));
  }
}

void restore_layer(const Checkpoint& ckpt, LinearLayer& layer, const std::string& prefix) {
  auto get = [&](const std::string& name, const TensorPtr& t) {
    auto it = ckpt.tensors.find(prefix + name);
    if (it == ckpt.tensors.end()) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("missing tensor \"{}{}\"", prefix, name));
    }
    if (it->second.shape != t->shape) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("tensor \"{}{}\" has the wrong shape",
                                                        prefix, name));
    }
    std::copy(it->second.data.begin(), it->second.data.end(), t->data.begin());
  };
  get(".weight", layer.weight);
  get(".bias", layer.bias);
  if (layer.has_batchnorm) {
    get(".gamma", layer.gamma);
    get(".beta", layer.beta);
    auto copy_stats = [&](const std::string& name, std::vector<Real>& dst) {
      auto it = ckpt.tensors.find(prefix + name);
      if (it == ckpt.tensors.end() || it->second.data.size() != dst.size()) {
        throw Error(ErrorCode::BadCheckpoint,
                    fmt::format("missing or misshaped tensor \"{}{}\"", prefix, name));
      }
      std::copy(it->second.data.begin(), it->second.data.end(), dst.begin());
    };
    copy_stats(".running_mean", layer.bn_state.running_mean);
    copy_stats(".running_var", layer.bn_state.running_var);
  }
}

}  // namespace

ClassifierConfig default_preset(std::size_t in_channels, std::size_t num_classes) {
  ClassifierConfig config;
  config.in_channels = in_channels;
  config.num_classes = num_classes;
  return config;
}

ClassifierConfig tiny_preset(std::size_t in_channels, std::size_t num_classes) {
  ClassifierConfig config;
  config.in_channels = in_channels;
  config.num_classes = num_classes;
  config.shared_mlp_widths = {32, 64, 256};
  config.head_widths = {128, 64};
  return config;
}

std::vector<TensorPtr> ClassifierModel::parameters() const {
  std::vector<TensorPtr> out;
  for (const LinearLayer& layer : shared) append_params(layer, out);
  for (const LinearLayer& layer : head) append_params(layer, out);
  append_params(output, out);
  return out;
}

ClassifierModel build_model(const ClassifierConfig& config, std::uint64_t seed) {
  if (config.num_classes < 2) {
    throw Error(ErrorCode::InvalidArgument, "a classifier needs at least 2 classes");
  }
  if (config.shared_mlp_widths.empty() || config.head_widths.empty()) {
    throw Error(ErrorCode::InvalidArgument, "layer width lists must be non-empty");
  }
  ClassifierModel model;
  model.config = config;

  std::size_t fan_in = config.in_channels;
  for (std::size_t i = 0; i < config.shared_mlp_widths.size(); ++i) {
    const std::size_t width = config.shared_mlp_widths[i];
    model.shared.push_back(
        make_layer(fan_in, width, config.use_batchnorm, seed, fmt::format("shared.{}", i)));
    fan_in = width;
  }
  for (std::size_t i = 0; i < config.head_widths.size(); ++i) {
    const std::size_t width = config.head_widths[i];
    model.head.push_back(
        make_layer(fan_in, width, config.use_batchnorm, seed, fmt::format("head.{}", i)));
    fan_in = width;
  }
  model.output.weight = init_weight(fan_in, config.num_classes, seed, "output.weight");
  model.output.bias = make_tensor({config.num_classes}, true);
  return model;
}

TensorPtr forward_pass(ClassifierModel& model, const FeatureMatrix& features,
                       std::size_t points_per_object, Rng* dropout_rng) {
  TensorPtr x = pooled_feature(model, features, points_per_object);
  // Dropout only fires when a mask stream is supplied; a training-mode pass
  // without one (the pre-update probe) still uses batch statistics.
  const bool drop = model.training && model.config.dropout_rate > 0 && dropout_rng != nullptr;
  for (LinearLayer& layer : model.head) {
    x = layer_forward(layer, x, model.training);
    if (drop) x = dropout(x, model.config.dropout_rate, *dropout_rng, true);
  }
  return add_bias(matmul(x, model.output.weight), model.output.bias);
}

std::vector<Real> predict(ClassifierModel& model, const FeatureMatrix& features) {
  const bool was_training = model.training;
  model.training = false;
  TensorPtr logits = forward_pass(model, features, features.rows, nullptr);
  model.training = was_training;
  return softmax(std::span<const Real>(logits->data.data(), model.config.num_classes));
}

std::vector<Real> global_feature(ClassifierModel& model, const FeatureMatrix& features) {
  const bool was_training = model.training;
  model.training = false;
  TensorPtr pooled = pooled_feature(model, features, features.rows);
  model.training = was_training;
  return pooled->data;
}

std::string TrainingLog::to_jsonl() const {
  std::string out;
  for (const Epoch& e : epochs) {
    out += fmt::format("{{\"epoch\":{},\"loss\":{},\"train_acc\":{}}}\n", e.epoch, e.loss,
                       e.train_accuracy);
  }
  return out;
}

namespace {

struct BatchData {
  FeatureMatrix features;
  std::vector<std::size_t> labels;
};

BatchData assemble_batch(const std::vector<TrainItem>& items, std::span<const std::size_t> picks,
                         const TrainConfig& config, std::size_t epoch) {
  BatchData batch;
  batch.features.mode = config.mode;
  const std::size_t c = channel_count(config.mode);
  batch.features.rows = picks.size() * config.sample_points;
  batch.features.data.reserve(batch.features.rows * c);
  for (std::size_t pick : picks) {
    const TrainItem& item = items[pick];
    const SampleIndices idx =
        farthest_point_sample(item.cloud.positions, config.sample_points,
                              derive_seed(config.seed, "fps", epoch, pick));
    const auto [normalized, record] = normalize_cloud(gather(item.cloud, idx));
    const FeatureMatrix features = assemble_features(normalized, config.mode);
    batch.features.data.insert(batch.features.data.end(), features.data.begin(),
                               features.data.end());
    batch.labels.push_back(item.label);
  }
  return batch;
}

std::size_t argmax_row(std::span<const Real> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

TrainingLog train(ClassifierModel& model, const std::vector<TrainItem>& train_set,
                  const TrainConfig& config) {
  if (train_set.empty()) {
    throw Error(ErrorCode::EmptyDataset, "training set is empty");
  }
  if (channel_count(config.mode) != model.config.in_channels) {
    throw Error(ErrorCode::ChannelMismatch,
                fmt::format("mode {} has {} channels, model expects {}",
                            feature_mode_name(config.mode), channel_count(config.mode),
                            model.config.in_channels));
  }
  for (const TrainItem& item : train_set) {
    if (item.label >= model.config.num_classes) {
      throw Error(ErrorCode::InvalidLabel,
                  fmt::format("label {} out of range for {} classes", item.label,
                              model.config.num_classes));
    }
  }

  const std::size_t n = train_set.size();
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  Adam adam(model.parameters(), adam_config);
  TrainingLog log;

  auto run_epoch = [&](std::size_t epoch, bool update) {
    model.training = true;  // batch statistics even for the probe
    Rng dropout_rng(derive_seed(config.seed, "dropout", epoch));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (update) {
      Rng order_rng(derive_seed(config.seed, "order", epoch));
      for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.below(i))]);
      }
    }

    Real loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      const BatchData batch =
          assemble_batch(train_set, std::span(order).subspan(start, count), config, epoch);
      std::vector<Real> probs;
      TensorPtr loss = softmax_cross_entropy(
          forward_pass(model, batch.features, config.sample_points,
                       update ? &dropout_rng : nullptr),
          batch.labels, &probs);
      if (update) {
        adam.zero_grad();
        backward(loss);
        adam.step();
      }
      loss_sum += loss->data[0] * static_cast<Real>(count);
      const std::size_t k = model.config.num_classes;
      for (std::size_t i = 0; i < count; ++i) {
        if (argmax_row(std::span(probs).subspan(i * k, k)) == batch.labels[i]) ++correct;
      }
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<Real>(n),
                          static_cast<Real>(correct) / static_cast<Real>(n)});
  };

  // Pre-update probe: batch-statistic forward with no dropout, no optimizer
  // step, and the running statistics restored afterwards.
  auto snapshot_states = [&] {
    std::vector<BatchNormState> states;
    for (const LinearLayer& layer : model.shared) states.push_back(layer.bn_state);
    for (const LinearLayer& layer : model.head) states.push_back(layer.bn_state);
    return states;
  };
  auto restore_states = [&](const std::vector<BatchNormState>& states) {
    std::size_t at = 0;
    for (LinearLayer& layer : model.shared) layer.bn_state = states[at++];
    for (LinearLayer& layer : model.head) layer.bn_state = states[at++];
  };
  const std::vector<BatchNormState> initial_states = snapshot_states();
  run_epoch(0, false);
  restore_states(initial_states);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    run_epoch(epoch, true);
  }
  model.training = false;
  return log;
}

void save_model(const ClassifierModel& model, const std::string& path) {
  Checkpoint ckpt;
  ckpt.metadata["format"] = "gscls-classifier";
  ckpt.metadata["version"] = "1";
  ckpt.metadata["in_channels"] = std::to_string(model.config.in_channels);
  ckpt.metadata["num_classes"] = std::to_string(model.config.num_classes);
  ckpt.metadata["shared_mlp_widths"] = join_widths(model.config.shared_mlp_widths);
  ckpt.metadata["head_widths"] = join_widths(model.config.head_widths);
  ckpt.metadata["dropout_rate"] = fmt::format("{}", model.config.dropout_rate);
  ckpt.metadata["use_batchnorm"] = model.config.use_batchnorm ? "1" : "0";
  for (std::size_t i = 0; i < model.shared.size(); ++i) {
    store_layer(ckpt, model.shared[i], fmt::format("shared.{}", i));
  }
  for (std::size_t i = 0; i < model.head.size(); ++i) {
    store_layer(ckpt, model.head[i], fmt::format("head.{}", i));
  }
  store_layer(ckpt, model.output, "output");
  save_checkpoint(ckpt, path);
}

ClassifierModel load_model(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ckpt.metadata.find(key);
    if (it == ckpt.metadata.end()) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: missing metadata \"{}\"", path, key));
    }
    return it->second;
  };
  if (meta("format") != "gscls-classifier") {
    throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: not a classifier checkpoint", path));
  }

  ClassifierConfig config;
  auto parse_size = [&](const std::string& key) {
    const std::string& text = meta(key);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: bad metadata \"{}\"", path, key));
    }
    return value;
  };
  config.in_channels = parse_size("in_channels");
  config.num_classes = parse_size("num_classes");
  config.shared_mlp_widths = parse_widths(meta("shared_mlp_widths"));
  config.head_widths = parse_widths(meta("head_widths"));
  {
    const std::string& text = meta("dropout_rate");
    double rate = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), rate);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::BadCheckpoint, fmt::format("{}: bad dropout_rate", path));
    }
    config.dropout_rate = static_cast<Real>(rate);
  }
  config.use_batchnorm = meta("use_batchnorm") == "1";

  ClassifierModel model = build_model(config, 0);
  for (std::size_t i = 0; i < model.shared.size(); ++i) {
    restore_layer(ckpt, model.shared[i], fmt::format("shared.{}", i));
  }
  for (std::size_t i = 0; i < model.head.size(); ++i) {
    restore_layer(ckpt, model.head[i], fmt::format("head.{}", i));
  }
  restore_layer(ckpt, model.output, "output");
  return model;
}

}  // namespace gscls
