#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gscls/real.hpp"
#include "gscls/rng.hpp"

namespace gscls {

// Dense tensor node in a dynamically recorded reverse-mode autodiff graph.
// Ops build new nodes holding shared_ptr edges to their inputs plus a closure
// that routes the node's gradient into the inputs' gradients.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // same length as data once backward touches the node
  bool requires_grad = false;

  std::vector<std::shared_ptr<Tensor>> parents;
  std::function<void(const Tensor&)> backward_fn;  // pulls this->grad into parents

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool in_graph() const { return requires_grad || !parents.empty(); }
  void ensure_grad();           // allocates zero grad storage if absent
  void zero_grad();
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::size_t> shape, bool requires_grad = false);
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<Real> data,
                      bool requires_grad = false);

// --- forward ops (each records its backward closure) ---

// (n,k) x (k,m) -> (n,m)
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// (n,c) + (c) broadcast over rows
TensorPtr add_bias(const TensorPtr& x, const TensorPtr& bias);
TensorPtr relu(const TensorPtr& x);
// Elementwise ops over equal shapes.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
// Sum of all elements -> scalar shape (1).
TensorPtr sum(const TensorPtr& x);
// Inverted-scaling dropout: training draws a keep mask and scales by
// 1/(1-rate); eval is the identity.
TensorPtr dropout(const TensorPtr& x, Real rate, Rng& rng, bool training);

// Running statistics owned by the layer that uses batchnorm.
struct BatchNormState {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;
  Real momentum = 0.9;
  Real eps = 1e-5;
};

// Per-channel batch normalization over the row axis of an (n,c) input.
// Training normalizes by batch statistics (biased variance) and updates the
// running estimates; eval normalizes by the running estimates row-wise.
TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                    BatchNormState& state, bool training);

// Reduces each consecutive group of `group_size` rows of an (n,c) input to
// its per-channel maximum: output (n/group_size, c). Ties route the gradient
// to the lowest row index.
TensorPtr max_over_points(const TensorPtr& x, std::size_t group_size);

// Mean cross-entropy of row-wise softmax over (n,k) logits against n labels.
// Log-sum-exp stabilized. When probs_out is non-null it receives the n x k
// probability rows (each summing to 1 within 1e-9).
TensorPtr softmax_cross_entropy(const TensorPtr& logits, std::span<const std::size_t> labels,
                                std::vector<Real>* probs_out = nullptr);

// Standalone stabilized softmax of one logit vector (no graph).
std::vector<Real> softmax(std::span<const Real> logits);

// Reverse-mode sweep from a scalar loss: topological order, each node visited
// once, leaf gradients accumulate additively across uses.
void backward(const TensorPtr& loss);

// --- optimizer ---

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(std::vector<TensorPtr> params, AdamConfig config = {});
  // Bias-corrected update from each parameter's current grad.
  void step();
  void zero_grad();
  std::size_t step_count() const { return step_; }

 private:
  std::vector<TensorPtr> params_;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
  std::size_t step_ = 0;
  AdamConfig config_;
};

}  // namespace gscls
