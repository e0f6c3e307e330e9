#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gscls/geometry.hpp"
#include "gscls/gs_ply.hpp"
#include "gscls/real.hpp"
#include "gscls/tensor.hpp"

namespace gscls {

struct ClassifierConfig {
  std::size_t in_channels = 3;  // one of 3, 4, 10, 11
  std::vector<std::size_t> shared_mlp_widths{64, 128, 1024};
  std::vector<std::size_t> head_widths{512, 256};
  std::size_t num_classes = 2;
  Real dropout_rate = 0.3;
  bool use_batchnorm = true;
};

ClassifierConfig default_preset(std::size_t in_channels, std::size_t num_classes);
ClassifierConfig tiny_preset(std::size_t in_channels, std::size_t num_classes);

struct LinearLayer {
  TensorPtr weight;  // (in, out)
  TensorPtr bias;    // (out)
  bool has_batchnorm = false;
  TensorPtr gamma;   // (out)
  TensorPtr beta;    // (out)
  BatchNormState bn_state;
};

// Shared-MLP point classifier: per-point MLP over the feature rows, followed
// by a per-channel max over each object's points (the global feature), then a
// fully connected head with dropout and a k-way softmax output.
struct ClassifierModel {
  ClassifierConfig config;
  std::vector<LinearLayer> shared;  // per-point layers
  std::vector<LinearLayer> head;    // hidden head layers (dropout after each)
  LinearLayer output;               // final k-way layer, no batchnorm
  bool training = false;

  std::vector<TensorPtr> parameters() const;
  std::size_t global_feature_width() const { return config.shared_mlp_widths.back(); }
};

// He-uniform weights, zero biases, gamma=1/beta=0; every parameter draws from
// its own named seed stream, so layers after the first are identical across
// in_channels choices with the same seed.
ClassifierModel build_model(const ClassifierConfig& config, std::uint64_t seed);

// Forward pass over a batch of objects stacked row-wise: `features` holds
// batch*points_per_object rows. Returns the (batch, k) logits node. Dropout
// fires only in training mode AND with a non-null mask stream.
TensorPtr forward_pass(ClassifierModel& model, const FeatureMatrix& features,
                       std::size_t points_per_object, Rng* dropout_rng);

// Probability vector of length k for one object (eval mode).
std::vector<Real> predict(ClassifierModel& model, const FeatureMatrix& features);

// Post-max-pool global feature for one object (eval mode).
std::vector<Real> global_feature(ClassifierModel& model, const FeatureMatrix& features);

struct TrainItem {
  GaussianCloud cloud;  // normalized on the fly during training
  std::size_t label;
  std::string id;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t sample_points = 1024;
  FeatureMode mode = FeatureMode::p;
  Real lr = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainingLog {
  struct Epoch {
    std::size_t epoch;
    Real loss;
    Real train_accuracy;
  };
  std::vector<Epoch> epochs;  // entry 0 is the pre-update probe

  std::string to_jsonl() const;
};

// Minimizes mean cross-entropy with Adam. Each epoch reshuffles object order
// and redraws the farthest-point subsets from seeded streams, so a fixed seed
// reproduces the trajectory exactly.
TrainingLog train(ClassifierModel& model, const std::vector<TrainItem>& train_set,
                  const TrainConfig& config);

void save_model(const ClassifierModel& model, const std::string& path);
ClassifierModel load_model(const std::string& path);

}  // namespace gscls
