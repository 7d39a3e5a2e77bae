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

#include "softbridge/critic.hpp"

#include "softbridge/errors.hpp"

namespace softbridge {

CriticMlp CriticMlp::init(Index in, Index width, Rng& rng) {
  CriticMlp net;
  net.hidden1 = DenseLayer::init(in, width, rng);
  net.hidden2 = DenseLayer::init(width, width, rng);
  net.output = DenseLayer::init(width, 1, rng);
  return net;
}

CriticMlp CriticMlp::zeros(Index in, Index width) {
  return CriticMlp{DenseLayer::zeros(in, width), DenseLayer::zeros(width, width),
                   DenseLayer::zeros(width, 1)};
}

void CriticMlp::append_params(ParamList& out, const std::string& prefix) {
  hidden1.append_params(out, prefix + ".hidden1");
  hidden2.append_params(out, prefix + ".hidden2");
  output.append_params(out, prefix + ".output");
}

Matrix critic_input(const Matrix& obs, const Matrix& actions) {
  require_shape(obs.rows() == actions.rows(), "critic_input: batch mismatch");
  Matrix x(obs.rows(), obs.cols() + actions.cols());
  x << obs, actions;
  return x;
}

Vector critic_forward(const CriticMlp& net, const Matrix& input, CriticTape* tape) {
  Matrix pre1 = dense_forward(net.hidden1, input);
  Matrix act1 = activation_forward(Activation::kElu, pre1);
  Matrix pre2 = dense_forward(net.hidden2, act1);
  Matrix act2 = activation_forward(Activation::kElu, pre2);
  Vector q = dense_forward(net.output, act2).col(0);
  if (tape != nullptr) {
    tape->input = input;
    tape->pre1 = std::move(pre1);
    tape->act1 = std::move(act1);
    tape->pre2 = std::move(pre2);
    tape->act2 = std::move(act2);
    tape->mark_recorded();
  }
  return q;
}

Matrix critic_backward(const CriticMlp& net, CriticTape& tape, const Vector& d_values,
                       CriticMlp* grad, bool want_input_grad) {
  tape.consume();
  require_shape(d_values.size() == tape.input.rows(), "critic_backward: batch mismatch");
  const Matrix d_out = d_values;
  Matrix d_act2 = dense_backward(net.output, tape.act2, d_out, grad ? &grad->output : nullptr);
  Matrix d_pre2 = activation_backward(Activation::kElu, tape.pre2, d_act2);
  Matrix d_act1 = dense_backward(net.hidden2, tape.act1, d_pre2, grad ? &grad->hidden2 : nullptr);
  Matrix d_pre1 = activation_backward(Activation::kElu, tape.pre1, d_act1);
  return dense_backward(net.hidden1, tape.input, d_pre1, grad ? &grad->hidden1 : nullptr,
                        want_input_grad);
}

TwinCritic TwinCritic::init(Index in, Index width, Rng& rng) {
  TwinCritic twin;
  twin.first = CriticMlp::init(in, width, rng);
  twin.second = CriticMlp::init(in, width, rng);
  return twin;
}

TwinCritic TwinCritic::zeros(Index in, Index width) {
  return TwinCritic{CriticMlp::zeros(in, width), CriticMlp::zeros(in, width)};
}

ParamList TwinCritic::params() {
  ParamList out = first_params();
  ParamList rest = second_params();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

ParamList TwinCritic::first_params() {
  ParamList out;
  first.append_params(out, "critic.q1");
  return out;
}

ParamList TwinCritic::second_params() {
  ParamList out;
  second.append_params(out, "critic.q2");
  return out;
}

}  // namespace softbridge
