// Copyright 2026 The docprobe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "docprobe/errors.hpp"
#include "docprobe/random.hpp"

namespace docprobe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ProbeConfig {
  std::size_t nhid = 400;
  double dropout = 0.0;
  std::size_t batch_size = 8;
  std::size_t max_epoch = 1000;
  std::size_t tenacity = 10;
  std::size_t attention_heads = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

// Softmax weights of the scaled scores rows * query / sqrt(d).
template <typename QueryDerived, typename RowsDerived>
Vector<typename RowsDerived::Scalar> attention_weights(const Eigen::MatrixBase<QueryDerived>& query,
                                                       const Eigen::MatrixBase<RowsDerived>& rows) {
  using Scalar = typename RowsDerived::Scalar;
  if (rows.rows() == 0) throw EmptyInput("attention over an empty sequence");
  if (rows.cols() != query.size())
    throw ShapeMismatch("query has " + std::to_string(query.size()) + " entries, rows have " +
                        std::to_string(rows.cols()));
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(rows.cols()));
  Vector<Scalar> scores = (rows * query.derived().template cast<Scalar>()) * scale;
  scores.array() -= scores.maxCoeff();
  scores = scores.array().exp().matrix();
  return scores / scores.sum();
}

// Attention-weighted average of the rows with a single learned query.
template <typename QueryDerived, typename RowsDerived>
Vector<typename RowsDerived::Scalar> attention_pool(const Eigen::MatrixBase<QueryDerived>& query,
                                                    const Eigen::MatrixBase<RowsDerived>& rows) {
  return rows.transpose() * attention_weights(query, rows);
}

// Learned query, then a sigmoid hidden layer and a softmax output layer.
// All parameters live in one flat vector ordered query, W1, b1, W2, b2 with
// the matrices row-major, which is also the checkpoint layout.
template <typename Scalar>
class ProbeModel {
 public:
  using VectorMap = Eigen::Map<Vector<Scalar>>;
  using ConstVectorMap = Eigen::Map<const Vector<Scalar>>;
  using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

  ProbeModel() = default;
  ProbeModel(Eigen::Index dim, Eigen::Index hidden, Eigen::Index classes)
      : dim_(dim), hidden_(hidden), classes_(classes),
        params_(Vector<Scalar>::Zero(parameter_count(dim, hidden, classes))) {}

  static Eigen::Index parameter_count(Eigen::Index dim, Eigen::Index hidden, Eigen::Index classes) {
    return dim + dim * hidden + hidden + hidden * classes + classes;
  }

  Eigen::Index dim() const { return dim_; }
  Eigen::Index hidden() const { return hidden_; }
  Eigen::Index classes() const { return classes_; }

  VectorMap query() { return {params_.data(), dim_}; }
  MatrixMap w1() { return {params_.data() + w1_offset(), dim_, hidden_}; }
  VectorMap b1() { return {params_.data() + b1_offset(), hidden_}; }
  MatrixMap w2() { return {params_.data() + w2_offset(), hidden_, classes_}; }
  VectorMap b2() { return {params_.data() + b2_offset(), classes_}; }

  ConstVectorMap query() const { return {params_.data(), dim_}; }
  ConstMatrixMap w1() const { return {params_.data() + w1_offset(), dim_, hidden_}; }
  ConstVectorMap b1() const { return {params_.data() + b1_offset(), hidden_}; }
  ConstMatrixMap w2() const { return {params_.data() + w2_offset(), hidden_, classes_}; }
  ConstVectorMap b2() const { return {params_.data() + b2_offset(), classes_}; }

  Vector<Scalar>& parameters() { return params_; }
  const Vector<Scalar>& parameters() const { return params_; }

  template <typename Other>
  ProbeModel<Other> cast() const {
    ProbeModel<Other> out(dim_, hidden_, classes_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

 private:
  Eigen::Index w1_offset() const { return dim_; }
  Eigen::Index b1_offset() const { return w1_offset() + dim_ * hidden_; }
  Eigen::Index w2_offset() const { return b1_offset() + hidden_; }
  Eigen::Index b2_offset() const { return w2_offset() + hidden_ * classes_; }

  Eigen::Index dim_ = 0;
  Eigen::Index hidden_ = 0;
  Eigen::Index classes_ = 0;
  Vector<Scalar> params_;
};

template <typename Scalar>
struct ProbeSample {
  RowMatrix<Scalar> inputs;  // T x d
  std::size_t label = 0;
};

// Dropout is active only when an rng is supplied and the rate is positive.
struct TrainMode {
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rng != nullptr && dropout > 0.0; }
};

// Glorot-uniform weights, zero biases and a zero query.
template <typename Scalar>
ProbeModel<Scalar> init_probe(Eigen::Index dim, Eigen::Index hidden, Eigen::Index classes, Rng& rng);

template <typename Scalar>
Vector<Scalar> forward(const ProbeModel<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                       TrainMode mode = {});

template <typename Scalar>
struct LossAndGrads {
  Scalar loss = 0;
  ProbeModel<Scalar> grads;
};

// Mean cross-entropy over the batch and its exact gradient.
template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const ProbeModel<Scalar>& model,
                                    std::span<const ProbeSample<Scalar>* const> batch,
                                    TrainMode mode = {});

template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const ProbeModel<Scalar>& model,
                                    std::span<const ProbeSample<Scalar>> batch, TrainMode mode = {});

template <typename Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(Eigen::Index n = 0) : m(Vector<Scalar>::Zero(n)), v(Vector<Scalar>::Zero(n)) {}
};

// One bias-corrected Adam update; t counts steps from 1.
template <typename Scalar>
void adam_step(ProbeModel<Scalar>& params, const ProbeModel<Scalar>& grads, AdamState<Scalar>& state,
               double lr, std::size_t t);

// Argmax with ties going to the lowest class index.
template <typename Scalar>
std::size_t predict(const ProbeModel<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs);

template <typename Scalar>
double evaluate(const ProbeModel<Scalar>& model, std::span<const ProbeSample<Scalar>> samples);

enum class StopReason { kTenacity, kMaxEpoch };

const char* stop_reason_name(StopReason reason);

struct TrainReport {
  std::size_t best_epoch = 0;  // 0-based index into dev_accuracy_curve
  std::vector<double> dev_accuracy_curve;
  double test_accuracy = 0.0;
  StopReason stopped_reason = StopReason::kMaxEpoch;
};

template <typename Scalar>
struct TrainedProbe {
  ProbeModel<Scalar> model;
  TrainReport report;
};

// Per-epoch shuffled mini-batch Adam with early stopping on dev accuracy;
// the returned model holds the best-epoch parameters.
template <typename Scalar>
TrainedProbe<Scalar> train_probe(const ProbeConfig& config, std::span<const ProbeSample<Scalar>> train,
                                 std::span<const ProbeSample<Scalar>> dev,
                                 std::span<const ProbeSample<Scalar>> test, std::size_t n_classes);

// Checkpoint "DPM1": u32 d, nhid, C, then float32 parameters.
void save_checkpoint(const ProbeModel<float>& model, const std::filesystem::path& path);
ProbeModel<float> load_checkpoint(const std::filesystem::path& path);

std::string report_to_json(const TrainReport& report);

}  // namespace docprobe
