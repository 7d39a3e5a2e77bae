// Copyright 2026 The softbridge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "softbridge/tensor_nn.hpp"

#include <algorithm>
#include <cmath>

#include "softbridge/errors.hpp"

namespace softbridge {

std::size_t total_size(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.data.size();
  return n;
}

void set_zero(const ParamList& params) {
  for (const auto& p : params) std::fill(p.data.begin(), p.data.end(), 0.0);
}

std::vector<double> flatten(const ParamList& params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const auto& p : params) flat.insert(flat.end(), p.data.begin(), p.data.end());
  return flat;
}

void unflatten(const ParamList& params, std::span<const double> flat) {
  require_shape(flat.size() == total_size(params), "unflatten: size mismatch");
  std::size_t offset = 0;
  for (const auto& p : params) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p.data.size(), p.data.begin());
    offset += p.data.size();
  }
}

namespace {
void require_same_layout(const ParamList& a, const ParamList& b, const char* what) {
  require_shape(a.size() == b.size(), std::string(what) + ": parameter count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    require_shape(a[i].rows == b[i].rows && a[i].cols == b[i].cols,
                  std::string(what) + ": shape mismatch at " + a[i].name);
  }
}
}  // namespace

void copy_params(const ParamList& dst, const ParamList& src) {
  require_same_layout(dst, src, "copy_params");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy(src[i].data.begin(), src[i].data.end(), dst[i].data.begin());
  }
}

bool all_finite(const ParamList& params) {
  for (const auto& p : params) {
    for (const double x : p.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void polyak_update(const ParamList& target, const ParamList& online, double rho) {
  require_same_layout(target, online, "polyak_update");
  const double keep = rho;
  const double take = 1.0 - rho;
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto dst = target[i].data;
    const auto src = online[i].data;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = keep * dst[j] + take * src[j];
  }
}

// ---------------------------------------------------------------------------
// Dense

DenseLayer DenseLayer::init(Index in, Index out, Rng& rng) {
  DenseLayer layer = zeros(in, out);
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  // Row-major fill order so the draw sequence is independent of storage order.
  for (Index r = 0; r < out; ++r) {
    for (Index c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  return layer;
}

DenseLayer DenseLayer::zeros(Index in, Index out) {
  return DenseLayer{Matrix::Zero(out, in), Vector::Zero(out)};
}

void DenseLayer::append_params(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight.rows(), weight.cols(),
                 std::span<double>(weight.data(), static_cast<std::size_t>(weight.size()))});
  out.push_back({prefix + ".bias", bias.size(), 1,
                 std::span<double>(bias.data(), static_cast<std::size_t>(bias.size()))});
}

Vector dense_forward(const DenseLayer& layer, const Vector& x) {
  require_shape(x.size() == layer.in_dim(), "dense_forward: input has " + std::to_string(x.size()) +
                                                " entries, layer expects " +
                                                std::to_string(layer.in_dim()));
  return layer.weight * x + layer.bias;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  require_shape(x.cols() == layer.in_dim(), "dense_forward: input has " + std::to_string(x.cols()) +
                                                " features, layer expects " +
                                                std::to_string(layer.in_dim()));
  Matrix y(x.rows(), layer.out_dim());
  y.noalias() = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy, DenseLayer* grad,
                      bool want_input_grad) {
  require_shape(dy.cols() == layer.out_dim() && dy.rows() == x.rows() &&
                    x.cols() == layer.in_dim(),
                "dense_backward: shape mismatch");
  if (grad != nullptr) {
    grad->weight.noalias() += dy.transpose() * x;
    grad->bias += dy.colwise().sum().transpose();
  }
  if (!want_input_grad) return {};
  Matrix dx(x.rows(), x.cols());
  dx.noalias() = dy * layer.weight;
  return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm LayerNorm::identity(Index dim, double epsilon) {
  require_contract(epsilon > 0.0, "LayerNorm: epsilon must be positive");
  return LayerNorm{Vector::Ones(dim), Vector::Zero(dim), epsilon};
}

LayerNorm LayerNorm::zeros(Index dim, double epsilon) {
  return LayerNorm{Vector::Zero(dim), Vector::Zero(dim), epsilon};
}

void LayerNorm::append_params(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gain", gain.size(), 1,
                 std::span<double>(gain.data(), static_cast<std::size_t>(gain.size()))});
  out.push_back({prefix + ".offset", offset.size(), 1,
                 std::span<double>(offset.data(), static_cast<std::size_t>(offset.size()))});
}

Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache) {
  require_contract(x.cols() >= 2, "layernorm_forward: dimension must be at least 2");
  require_shape(x.cols() == ln.dim(), "layernorm_forward: dimension mismatch");
  // Column sweeps: the batch runs down each column, so every pass is
  // contiguous and the per-row accumulators stay in cache.
  const Index n = x.rows();
  const Index d = x.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Vector mean = Vector::Zero(n);
  for (Index j = 0; j < d; ++j) mean += x.col(j);
  mean *= inv_d;
  Vector var = Vector::Zero(n);
  for (Index j = 0; j < d; ++j) var.array() += (x.col(j) - mean).array().square();
  const Vector inv_std = (var.array() * inv_d + ln.epsilon).rsqrt();
  Matrix y(n, d);
  if (cache != nullptr) {
    cache->normalized.resize(n, d);
    for (Index j = 0; j < d; ++j) {
      cache->normalized.col(j) = (x.col(j) - mean).cwiseProduct(inv_std);
      y.col(j).array() = cache->normalized.col(j).array() * ln.gain(j) + ln.offset(j);
    }
    cache->inv_std = inv_std;
  } else {
    for (Index j = 0; j < d; ++j) {
      y.col(j).array() = (x.col(j) - mean).array() * inv_std.array() * ln.gain(j) + ln.offset(j);
    }
  }
  return y;
}

Vector layernorm_forward(const LayerNorm& ln, const Vector& x) {
  Matrix row = x.transpose();
  return layernorm_forward(ln, row).transpose();
}

Matrix layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy,
                          LayerNorm* grad) {
  const Matrix& xhat = cache.normalized;
  require_shape(dy.rows() == xhat.rows() && dy.cols() == xhat.cols(),
                "layernorm_backward: shape mismatch");
  const Index n = dy.rows();
  const Index d = dy.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Vector mean_d = Vector::Zero(n);
  Vector mean_dx = Vector::Zero(n);
  for (Index j = 0; j < d; ++j) {
    const auto g = dy.col(j);
    const auto xh = xhat.col(j);
    if (grad != nullptr) {
      grad->gain(j) += g.dot(xh);
      grad->offset(j) += g.sum();
    }
    mean_d += ln.gain(j) * g;
    mean_dx.array() += ln.gain(j) * g.array() * xh.array();
  }
  mean_d *= inv_d;
  mean_dx *= inv_d;
  Matrix dx(n, d);
  for (Index j = 0; j < d; ++j) {
    dx.col(j).array() =
        (ln.gain(j) * dy.col(j).array() - mean_d.array() - xhat.col(j).array() * mean_dx.array()) *
        cache.inv_std.array();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::kElu:
      return x > 0.0 ? x : std::expm1(x);
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSoftplus:
      return softplus(x);
  }
  return x;
}

double activate_derivative(Activation kind, double x) {
  switch (kind) {
    case Activation::kElu:
      return x > 0.0 ? 1.0 : std::exp(x);
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kSoftplus:
      return sigmoid(x);
  }
  return 1.0;
}

Vector activation_forward(Activation kind, const Vector& x) {
  return x.unaryExpr([kind](double v) { return activate(kind, v); });
}

Matrix activation_forward(Activation kind, const Matrix& x) {
  if (kind == Activation::kElu) {
    // exp vectorizes, expm1 does not; the absolute error is ~1e-16.
    return (x.array().max(0.0) + (x.array().min(0.0).exp() - 1.0)).matrix();
  }
  return x.unaryExpr([kind](double v) { return activate(kind, v); });
}

Matrix activation_backward(Activation kind, const Matrix& pre, const Matrix& dy) {
  require_shape(pre.rows() == dy.rows() && pre.cols() == dy.cols(),
                "activation_backward: shape mismatch");
  if (kind == Activation::kElu) {
    // exp(min(x, 0)) is 1 on the positive side.
    return (pre.array().min(0.0).exp() * dy.array()).matrix();
  }
  return pre.unaryExpr([kind](double v) { return activate_derivative(kind, v); })
      .cwiseProduct(dy);
}

// ---------------------------------------------------------------------------
// Tape and optimizer

void GradTape::consume() {
  require_contract(recorded_, "backward called without a recorded forward pass");
  require_contract(!consumed_, "backward called twice on the same forward pass");
  consumed_ = true;
}

AdamState::AdamState(std::size_t n_params, AdamConfig config)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

bool AdamState::step(const ParamList& params, const ParamList& grads) {
  require_shape(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
  require_shape(total_size(params) == m_.size(), "adam_step: optimizer state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(params[i].data.size() == grads[i].data.size(),
                  "adam_step: shape mismatch at " + params[i].name);
  }
  if (!all_finite(grads)) return false;

  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_count_);
  const double corr1 = 1.0 - std::pow(b1, t);
  const double corr2 = 1.0 - std::pow(b2, t);
  std::size_t k = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data;
    const auto g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j, ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * g[j];
      v_[k] = b2 * v_[k] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m_[k] / corr1;
      const double v_hat = v_[k] / corr2;
      p[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
  return true;
}

}  // namespace softbridge
