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

#ifndef SOFTBRIDGE_TENSOR_NN_HPP_
#define SOFTBRIDGE_TENSOR_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "softbridge/rng.hpp"

namespace softbridge {

// Batched activations are stored one sample per row: [batch x features].
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

// A named view of one contiguous parameter array inside a network.
struct ParamRef {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::span<double> data;
};

using ParamList = std::vector<ParamRef>;

std::size_t total_size(const ParamList& params);
void set_zero(const ParamList& params);
std::vector<double> flatten(const ParamList& params);
void unflatten(const ParamList& params, std::span<const double> flat);
// Requires identical layouts; throws ShapeError otherwise.
void copy_params(const ParamList& dst, const ParamList& src);
bool all_finite(const ParamList& params);

// target <- rho * target + (1 - rho) * online.
void polyak_update(const ParamList& target, const ParamList& online, double rho);

struct DenseLayer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]

  // Weights uniform in +-sqrt(1/fan_in), zero bias.
  static DenseLayer init(Index in, Index out, Rng& rng);
  static DenseLayer zeros(Index in, Index out);

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
  void append_params(ParamList& out, const std::string& prefix);
};

Vector dense_forward(const DenseLayer& layer, const Vector& x);
Matrix dense_forward(const DenseLayer& layer, const Matrix& x);

// Accumulates parameter gradients into `grad` when non-null and returns the
// input gradient (skipped when `want_input_grad` is false).
Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& dy,
                      DenseLayer* grad, bool want_input_grad = true);

struct LayerNorm {
  Vector gain;
  Vector offset;
  double epsilon = 1e-5;

  static LayerNorm identity(Index dim, double epsilon = 1e-5);
  static LayerNorm zeros(Index dim, double epsilon = 1e-5);
  Index dim() const { return gain.size(); }
  void append_params(ParamList& out, const std::string& prefix);
};

struct LayerNormCache {
  Matrix normalized;  // (x - mean) * inv_std
  Vector inv_std;     // per row
};

Vector layernorm_forward(const LayerNorm& ln, const Vector& x);
Matrix layernorm_forward(const LayerNorm& ln, const Matrix& x, LayerNormCache* cache = nullptr);
Matrix layernorm_backward(const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy,
                          LayerNorm* grad);

enum class Activation { kElu, kTanh, kSoftplus };

double activate(Activation kind, double x);
// Derivative evaluated at the pre-activation value.
double activate_derivative(Activation kind, double x);
Vector activation_forward(Activation kind, const Vector& x);
Matrix activation_forward(Activation kind, const Matrix& x);
Matrix activation_backward(Activation kind, const Matrix& pre, const Matrix& dy);

double softplus(double x);
double sigmoid(double x);

// Reverse-mode bookkeeping shared by the per-architecture tapes. A tape is
// filled by exactly one forward pass and may be replayed backward once.
class GradTape {
 public:
  void mark_recorded() {
    recorded_ = true;
    consumed_ = false;
  }
  // Throws ContractError when nothing was recorded or backward already ran.
  void consume();
  bool recorded() const { return recorded_; }
  bool consumed() const { return consumed_; }

 private:
  bool recorded_ = false;
  bool consumed_ = false;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t n_params, AdamConfig config);

  // Applies one bias-corrected Adam update. A non-finite gradient rejects
  // the whole update (parameters and moments untouched) and returns false.
  bool step(const ParamList& params, const ParamList& grads);

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_count_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t step_count_ = 0;
};

}  // namespace softbridge

#endif  // SOFTBRIDGE_TENSOR_NN_HPP_
