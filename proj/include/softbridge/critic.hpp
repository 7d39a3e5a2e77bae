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

#ifndef SOFTBRIDGE_CRITIC_HPP_
#define SOFTBRIDGE_CRITIC_HPP_

#include <string>

#include "softbridge/rng.hpp"
#include "softbridge/tensor_nn.hpp"

namespace softbridge {

// Scalar Q(s, a): input concat(s, a), two ELU hidden layers, linear output.
struct CriticMlp {
  DenseLayer hidden1;
  DenseLayer hidden2;
  DenseLayer output;

  static CriticMlp init(Index in, Index width, Rng& rng);
  static CriticMlp zeros(Index in, Index width);
  Index input_dim() const { return hidden1.in_dim(); }
  void append_params(ParamList& out, const std::string& prefix);
};

struct CriticTape : GradTape {
  Matrix input;
  Matrix pre1;
  Matrix act1;
  Matrix pre2;
  Matrix act2;
};

Matrix critic_input(const Matrix& obs, const Matrix& actions);

// Returns one value per row.
Vector critic_forward(const CriticMlp& net, const Matrix& input, CriticTape* tape = nullptr);

// Backpropagates d(loss)/d(Q_b). Parameter gradients accumulate into `grad`
// when non-null; the input gradient is returned when requested.
Matrix critic_backward(const CriticMlp& net, CriticTape& tape, const Vector& d_values,
                       CriticMlp* grad, bool want_input_grad);

struct TwinCritic {
  CriticMlp first;
  CriticMlp second;

  static TwinCritic init(Index in, Index width, Rng& rng);
  static TwinCritic zeros(Index in, Index width);
  ParamList params();
  ParamList first_params();
  ParamList second_params();
};

}  // namespace softbridge

#endif  // SOFTBRIDGE_CRITIC_HPP_
