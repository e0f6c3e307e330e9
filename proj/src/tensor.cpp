#include "gscls/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <unordered_set>

#include "gscls/error.hpp"

namespace gscls {

namespace {

using MatrixR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatrixR>;
using CMapR = Eigen::Map<const MatrixR>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.shape.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{} expects a 2-D tensor", op));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw Error(ErrorCode::ShapeMismatch, fmt::format("{} operands differ in shape", op));
  }
}

}  // namespace

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
}

void Tensor::zero_grad() {
  grad.assign(data.size(), Real(0));
}

TensorPtr make_tensor(std::vector<std::size_t> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->data.assign(shape_product(shape), Real(0));
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<Real> data,
                      bool requires_grad) {
  if (shape_product(shape) != data.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("data length {} does not match shape product {}", data.size(),
                            shape_product(shape)));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  require_matrix(*a, "matmul");
  require_matrix(*b, "matmul");
  if (a->shape[1] != b->shape[0]) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("matmul inner dimensions {} and {} differ", a->shape[1], b->shape[0]));
  }
  const std::size_t n = a->shape[0], k = a->shape[1], m = b->shape[1];

  auto out = make_tensor({n, m});
  {
    CMapR A(a->data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    CMapR B(b->data.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    MapR C(out->data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    C.noalias() = A * B;
  }
  out->parents = {a, b};
  out->backward_fn = [a, b, n, k, m](const Tensor& self) {
    CMapR dC(self.grad.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    if (a->in_graph()) {
      a->ensure_grad();
      CMapR B(b->data.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
      MapR dA(a->grad.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
      dA.noalias() += dC * B.transpose();
    }
    if (b->in_graph()) {
      b->ensure_grad();
      CMapR A(a->data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
      MapR dB(b->grad.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
      dB.noalias() += A.transpose() * dC;
    }
  };
  return out;
}

TensorPtr add_bias(const TensorPtr& x, const TensorPtr& bias) {
  require_matrix(*x, "add_bias");
  if (bias->shape.size() != 1 || bias->shape[0] != x->shape[1]) {
    throw Error(ErrorCode::ShapeMismatch, "bias length must equal the column count");
  }
  const std::size_t n = x->shape[0], c = x->shape[1];

  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out->data[i * c + j] = x->data[i * c + j] + bias->data[j];
  }
  out->parents = {x, bias};
  out->backward_fn = [x, bias, n, c](const Tensor& self) {
    if (x->in_graph()) {
      x->ensure_grad();
      for (std::size_t i = 0; i < n * c; ++i) x->grad[i] += self.grad[i];
    }
    if (bias->in_graph()) {
      bias->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) bias->grad[j] += self.grad[i * c + j];
      }
    }
  };
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = x->data[i] > 0 ? x->data[i] : Real(0);
  out->parents = {x};
  out->backward_fn = [x](const Tensor& self) {
    if (!x->in_graph()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->data.size(); ++i) {
      if (x->data[i] > 0) x->grad[i] += self.grad[i];
    }
  };
  return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(*a, *b, "add");
  auto out = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] + b->data[i];
  out->parents = {a, b};
  out->backward_fn = [a, b](const Tensor& self) {
    for (const TensorPtr& p : {a, b}) {
      if (!p->in_graph()) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  };
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(*a, *b, "mul");
  auto out = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = a->data[i] * b->data[i];
  out->parents = {a, b};
  out->backward_fn = [a, b](const Tensor& self) {
    if (a->in_graph()) {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += self.grad[i] * b->data[i];
    }
    if (b->in_graph()) {
      b->ensure_grad();
      for (std::size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += self.grad[i] * a->data[i];
    }
  };
  return out;
}

TensorPtr sum(const TensorPtr& x) {
  auto out = make_tensor({1});
  Real total = 0;
  for (Real v : x->data) total += v;
  out->data[0] = total;
  out->parents = {x};
  out->backward_fn = [x](const Tensor& self) {
    if (!x->in_graph()) return;
    x->ensure_grad();
    for (Real& g : x->grad) g += self.grad[0];
  };
  return out;
}

TensorPtr dropout(const TensorPtr& x, Real rate, Rng& rng, bool training) {
  if (rate < 0 || rate >= 1) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("dropout rate {} outside [0, 1)", rate));
  }
  if (!training || rate == 0) {
    auto out = make_tensor(x->shape, x->data);
    out->parents = {x};
    out->backward_fn = [x](const Tensor& self) {
      if (!x->in_graph()) return;
      x->ensure_grad();
      for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self.grad[i];
    };
    return out;
  }

  const Real keep_scale = Real(1) / (Real(1) - rate);
  auto mask = std::make_shared<std::vector<Real>>(x->size());
  for (Real& m : *mask) m = rng.next_double() >= rate ? keep_scale : Real(0);

  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) out->data[i] = x->data[i] * (*mask)[i];
  out->parents = {x};
  out->backward_fn = [x, mask](const Tensor& self) {
    if (!x->in_graph()) return;
    x->ensure_grad();
    for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self.grad[i] * (*mask)[i];
  };
  return out;
}

TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                    BatchNormState& state, bool training) {
  require_matrix(*x, "batchnorm");
  const std::size_t n = x->shape[0], c = x->shape[1];
  if (gamma->size() != c || beta->size() != c) {
    throw Error(ErrorCode::ShapeMismatch, "batchnorm gamma/beta length must equal column count");
  }
  if (state.running_mean.size() != c) state.running_mean.assign(c, Real(0));
  if (state.running_var.size() != c) state.running_var.assign(c, Real(1));

  auto xhat = std::make_shared<std::vector<Real>>(n * c);
  auto inv_std = std::make_shared<std::vector<Real>>(c);

  if (training) {
    for (std::size_t j = 0; j < c; ++j) {
      Real mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += x->data[i * c + j];
      mean /= static_cast<Real>(n);
      Real var = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const Real d = x->data[i * c + j] - mean;
        var += d * d;
      }
      var /= static_cast<Real>(n);  // biased, matching the running estimate
      (*inv_std)[j] = Real(1) / std::sqrt(var + state.eps);
      for (std::size_t i = 0; i < n; ++i) {
        (*xhat)[i * c + j] = (x->data[i * c + j] - mean) * (*inv_std)[j];
      }
      state.running_mean[j] = state.momentum * state.running_mean[j] + (1 - state.momentum) * mean;
      state.running_var[j] = state.momentum * state.running_var[j] + (1 - state.momentum) * var;
    }
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      (*inv_std)[j] = Real(1) / std::sqrt(state.running_var[j] + state.eps);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        (*xhat)[i * c + j] = (x->data[i * c + j] - state.running_mean[j]) * (*inv_std)[j];
      }
    }
  }

  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out->data[i * c + j] = gamma->data[j] * (*xhat)[i * c + j] + beta->data[j];
    }
  }
  out->parents = {x, gamma, beta};
  out->backward_fn = [x, gamma, beta, xhat, inv_std, n, c, training](const Tensor& self) {
    if (gamma->in_graph()) {
      gamma->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          gamma->grad[j] += self.grad[i * c + j] * (*xhat)[i * c + j];
        }
      }
    }
    if (beta->in_graph()) {
      beta->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) beta->grad[j] += self.grad[i * c + j];
      }
    }
    if (!x->in_graph()) return;
    x->ensure_grad();
    if (!training) {
      // Running statistics are constants: dx = dy * gamma * inv_std.
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
          x->grad[i * c + j] += self.grad[i * c + j] * gamma->data[j] * (*inv_std)[j];
        }
      }
      return;
    }
    for (std::size_t j = 0; j < c; ++j) {
      Real sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_dy += self.grad[i * c + j];
        sum_dy_xhat += self.grad[i * c + j] * (*xhat)[i * c + j];
      }
      const Real inv_n = Real(1) / static_cast<Real>(n);
      const Real scale = gamma->data[j] * (*inv_std)[j];
      for (std::size_t i = 0; i < n; ++i) {
        x->grad[i * c + j] += scale * (self.grad[i * c + j] - inv_n * sum_dy -
                                       (*xhat)[i * c + j] * inv_n * sum_dy_xhat);
      }
    }
  };
  return out;
}

TensorPtr max_over_points(const TensorPtr& x, std::size_t group_size) {
  require_matrix(*x, "max_over_points");
  const std::size_t n = x->shape[0], c = x->shape[1];
  if (group_size == 0 || n % group_size != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("row count {} not divisible by group size {}", n, group_size));
  }
  const std::size_t groups = n / group_size;

  auto out = make_tensor({groups, c});
  auto argmax = std::make_shared<std::vector<std::size_t>>(groups * c);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t row0 = g * group_size;
    for (std::size_t j = 0; j < c; ++j) {
      Real best = x->data[row0 * c + j];
      std::size_t best_row = row0;
      for (std::size_t i = row0 + 1; i < row0 + group_size; ++i) {
        if (x->data[i * c + j] > best) {  // strict: ties keep the lowest row
          best = x->data[i * c + j];
          best_row = i;
        }
      }
      out->data[g * c + j] = best;
      (*argmax)[g * c + j] = best_row;
    }
  }
  out->parents = {x};
  out->backward_fn = [x, argmax, groups, c](const Tensor& self) {
    if (!x->in_graph()) return;
    x->ensure_grad();
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t j = 0; j < c; ++j) {
        x->grad[(*argmax)[g * c + j] * c + j] += self.grad[g * c + j];
      }
    }
  };
  return out;
}

TensorPtr softmax_cross_entropy(const TensorPtr& logits, std::span<const std::size_t> labels,
                                std::vector<Real>* probs_out) {
  require_matrix(*logits, "softmax_cross_entropy");
  const std::size_t n = logits->shape[0], k = logits->shape[1];
  if (labels.size() != n) {
    throw Error(ErrorCode::ShapeMismatch,
                fmt::format("{} labels for {} logit rows", labels.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= k) {
      throw Error(ErrorCode::InvalidLabel,
                  fmt::format("label {} out of range for {} classes", labels[i], k));
    }
  }

  auto probs = std::make_shared<std::vector<Real>>(n * k);
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = logits->data.data() + i * k;
    Real row_max = row[0];
    for (std::size_t j = 1; j < k; ++j) row_max = std::max(row_max, row[j]);
    Real lse = 0;
    for (std::size_t j = 0; j < k; ++j) lse += std::exp(row[j] - row_max);
    lse = std::log(lse);
    for (std::size_t j = 0; j < k; ++j) {
      (*probs)[i * k + j] = std::exp(row[j] - row_max - lse);
    }
    total -= row[labels[i]] - row_max - lse;
  }
  if (probs_out) *probs_out = *probs;

  auto out = make_tensor({1});
  out->data[0] = total / static_cast<Real>(n);
  out->parents = {logits};
  std::vector<std::size_t> labels_copy(labels.begin(), labels.end());
  out->backward_fn = [logits, probs, labels_copy, n, k](const Tensor& self) {
    if (!logits->in_graph()) return;
    logits->ensure_grad();
    const Real scale = self.grad[0] / static_cast<Real>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const Real onehot = j == labels_copy[i] ? Real(1) : Real(0);
        logits->grad[i * k + j] += scale * ((*probs)[i * k + j] - onehot);
      }
    }
  };
  return out;
}

std::vector<Real> softmax(std::span<const Real> logits) {
  if (logits.empty()) {
    throw Error(ErrorCode::EmptyInput, "softmax over an empty vector");
  }
  Real row_max = logits[0];
  for (Real v : logits) row_max = std::max(row_max, v);
  std::vector<Real> out(logits.size());
  Real denom = 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - row_max);
    denom += out[j];
  }
  for (Real& v : out) v /= denom;
  return out;
}

void backward(const TensorPtr& loss) {
  if (loss->size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward requires a scalar loss");
  }
  if (!loss->in_graph()) {
    throw Error(ErrorCode::DetachedGraph, "loss is not attached to a recorded graph");
  }

  // Iterative post-order DFS gives the topological order.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  std::vector<std::pair<Tensor*, std::size_t>> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Tensor* child = node->parents[next_child++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_fn && node->grad.size() == node->data.size()) {
      node->backward_fn(*node);
    }
  }
}

Adam::Adam(std::vector<TensorPtr> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const TensorPtr& p : params_) {
    m_.emplace_back(p->size(), Real(0));
    v_.emplace_back(p->size(), Real(0));
  }
}

void Adam::step() {
  ++step_;
  const Real bc1 = 1 - std::pow(config_.beta1, static_cast<Real>(step_));
  const Real bc2 = 1 - std::pow(config_.beta2, static_cast<Real>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = *params_[pi];
    if (p.size() != m_[pi].size()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter shape changed under the optimizer");
    }
    p.ensure_grad();
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const Real g = p.grad[i];
      m_[pi][i] = config_.beta1 * m_[pi][i] + (1 - config_.beta1) * g;
      v_[pi][i] = config_.beta2 * v_[pi][i] + (1 - config_.beta2) * g * g;
      const Real m_hat = m_[pi][i] / bc1;
      const Real v_hat = v_[pi][i] / bc2;
      p.data[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (const TensorPtr& p : params_) p->zero_grad();
}

}  // namespace gscls
