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

#include "docprobe/probe.hpp"

#include <bit>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace docprobe {

void ProbeConfig::validate() const {
  if (nhid < 1) throw InvalidArgument("nhid must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (tenacity < 1) throw InvalidArgument("tenacity must be at least 1");
  if (max_epoch < 1) throw InvalidArgument("max_epoch must be at least 1");
  if (attention_heads != 1) throw InvalidArgument("only a single attention head is supported");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be non-negative");
}

const char* stop_reason_name(StopReason reason) {
  return reason == StopReason::kTenacity ? "tenacity" : "max_epoch";
}

namespace {

template <typename Scalar>
void fill_glorot(Eigen::Map<RowMatrix<Scalar>> w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = static_cast<Scalar>(uniform_real(rng, -bound, bound));
}

template <typename Scalar>
void check_shape(const ProbeModel<Scalar>& model, Eigen::Index cols) {
  if (cols != model.dim())
    throw ShapeMismatch("inputs have " + std::to_string(cols) + " columns, probe expects " +
                        std::to_string(model.dim()));
}

// Inverted-dropout scale per hidden unit: 0 for dropped units, 1/(1-p) else.
template <typename Scalar>
Vector<Scalar> dropout_mask(Eigen::Index hidden, TrainMode mode) {
  Vector<Scalar> mask = Vector<Scalar>::Ones(hidden);
  if (!mode.active()) return mask;
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - mode.dropout));
  for (Eigen::Index i = 0; i < hidden; ++i)
    mask(i) = uniform_unit(*mode.rng) < mode.dropout ? Scalar(0) : keep;
  return mask;
}

template <typename Scalar>
Vector<Scalar> sigmoid(const Vector<Scalar>& z) {
  return (Scalar(1) / (Scalar(1) + (-z.array()).exp())).matrix();
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& z) {
  Vector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Scalar>
std::size_t argmax_lowest(const Vector<Scalar>& p) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p(i) > p(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

}  // namespace

template <typename Scalar>
ProbeModel<Scalar> init_probe(Eigen::Index dim, Eigen::Index hidden, Eigen::Index classes, Rng& rng) {
  ProbeModel<Scalar> model(dim, hidden, classes);
  fill_glorot<Scalar>(model.w1(), rng);
  fill_glorot<Scalar>(model.w2(), rng);
  return model;
}

template <typename Scalar>
Vector<Scalar> forward(const ProbeModel<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                       TrainMode mode) {
  check_shape(model, inputs.cols());
  const Vector<Scalar> pooled = attention_pool(model.query(), inputs);
  Vector<Scalar> h = sigmoid<Scalar>(model.w1().transpose() * pooled + model.b1());
  h.array() *= dropout_mask<Scalar>(model.hidden(), mode).array();
  return softmax<Scalar>(model.w2().transpose() * h + model.b2());
}

template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const ProbeModel<Scalar>& model,
                                    std::span<const ProbeSample<Scalar>* const> batch, TrainMode mode) {
  if (batch.empty()) throw EmptyInput("loss over an empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = model.dim();
  const Eigen::Index hidden = model.hidden();
  const Eigen::Index classes = model.classes();

  // Pooling per example, then the two dense layers batched.
  RowMatrix<Scalar> pooled(n, d);
  std::vector<Vector<Scalar>> alphas(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = batch[static_cast<std::size_t>(i)]->inputs;
    check_shape(model, x.cols());
    if (batch[static_cast<std::size_t>(i)]->label >= static_cast<std::size_t>(classes))
      throw ShapeMismatch("label " + std::to_string(batch[static_cast<std::size_t>(i)]->label) +
                          " outside " + std::to_string(classes) + " classes");
    alphas[static_cast<std::size_t>(i)] = attention_weights(model.query(), x);
    pooled.row(i) = (x.transpose() * alphas[static_cast<std::size_t>(i)]).transpose();
  }

  RowMatrix<Scalar> z1 = pooled * model.w1();
  z1.rowwise() += model.b1().transpose();
  const RowMatrix<Scalar> h = (Scalar(1) / (Scalar(1) + (-z1.array()).exp())).matrix();
  RowMatrix<Scalar> masks(n, hidden);
  for (Eigen::Index i = 0; i < n; ++i) masks.row(i) = dropout_mask<Scalar>(hidden, mode).transpose();
  const RowMatrix<Scalar> hd = h.cwiseProduct(masks);
  RowMatrix<Scalar> z2 = hd * model.w2();
  z2.rowwise() += model.b2().transpose();

  LossAndGrads<Scalar> out{Scalar(0), ProbeModel<Scalar>(d, hidden, classes)};
  RowMatrix<Scalar> dz2(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mx = z2.row(i).maxCoeff();
    const Scalar lse = mx + std::log((z2.row(i).array() - mx).exp().sum());
    const auto y = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->label);
    out.loss += lse - z2(i, y);
    dz2.row(i) = (z2.row(i).array() - lse).exp().matrix();
    dz2(i, y) -= Scalar(1);
  }
  out.loss /= static_cast<Scalar>(n);
  if (!std::isfinite(static_cast<double>(out.loss)))
    throw NonFiniteLoss("cross-entropy evaluated to " + std::to_string(static_cast<double>(out.loss)));
  dz2 /= static_cast<Scalar>(n);

  out.grads.w2() = hd.transpose() * dz2;
  out.grads.b2() = dz2.colwise().sum().transpose();
  const RowMatrix<Scalar> dz1 =
      ((dz2 * model.w2().transpose()).array() * masks.array() * h.array() * (Scalar(1) - h.array())).matrix();
  out.grads.w1() = pooled.transpose() * dz1;
  out.grads.b1() = dz1.colwise().sum().transpose();
  const RowMatrix<Scalar> dpooled = dz1 * model.w1().transpose();

  // Back through the softmax over positions to the query.
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d));
  Vector<Scalar> dquery = Vector<Scalar>::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = batch[static_cast<std::size_t>(i)]->inputs;
    const auto& alpha = alphas[static_cast<std::size_t>(i)];
    const Vector<Scalar> dalpha = x * dpooled.row(i).transpose();
    const Vector<Scalar> dscore = alpha.cwiseProduct((dalpha.array() - alpha.dot(dalpha)).matrix());
    dquery.noalias() += x.transpose() * dscore;
  }
  out.grads.query() = dquery * scale;
  return out;
}

template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const ProbeModel<Scalar>& model,
                                    std::span<const ProbeSample<Scalar>> batch, TrainMode mode) {
  std::vector<const ProbeSample<Scalar>*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& s : batch) ptrs.push_back(&s);
  return loss_and_grads<Scalar>(model, std::span<const ProbeSample<Scalar>* const>(ptrs), mode);
}

template <typename Scalar>
void adam_step(ProbeModel<Scalar>& params, const ProbeModel<Scalar>& grads, AdamState<Scalar>& state,
               double lr, std::size_t t) {
  if (t < 1) throw InvalidArgument("Adam step counter starts at 1");
  const auto& g = grads.parameters();
  auto& p = params.parameters();
  if (state.m.size() != p.size()) state = AdamState<Scalar>(p.size());
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  state.m = b1 * state.m + (Scalar(1) - b1) * g;
  state.v = b2 * state.v + (Scalar(1) - b2) * g.cwiseAbs2();
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, static_cast<double>(t)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, static_cast<double>(t)));
  const auto eps = static_cast<Scalar>(state.epsilon);
  p.array() -= static_cast<Scalar>(lr) * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

template <typename Scalar>
std::size_t predict(const ProbeModel<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs) {
  return argmax_lowest<Scalar>(forward(model, inputs));
}

template <typename Scalar>
double evaluate(const ProbeModel<Scalar>& model, std::span<const ProbeSample<Scalar>> samples) {
  if (samples.empty()) throw EmptySplit("no examples to evaluate");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += predict<Scalar>(model, s.inputs) == s.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

template <typename Scalar>
TrainedProbe<Scalar> train_probe(const ProbeConfig& config, std::span<const ProbeSample<Scalar>> train,
                                 std::span<const ProbeSample<Scalar>> dev,
                                 std::span<const ProbeSample<Scalar>> test, std::size_t n_classes) {
  config.validate();
  if (train.empty()) throw EmptySplit("train split is empty");
  if (dev.empty()) throw EmptySplit("dev split is empty");
  if (test.empty()) throw EmptySplit("test split is empty");
  if (n_classes < 1) throw InvalidArgument("probe needs at least one class");

  const Eigen::Index dim = train.front().inputs.cols();
  for (auto split : {train, dev, test})
    for (const auto& s : split) {
      if (s.label >= n_classes)
        throw InvalidArgument("label " + std::to_string(s.label) + " outside " + std::to_string(n_classes) +
                              " classes");
      if (s.inputs.cols() != dim)
        throw ShapeMismatch("inputs of width " + std::to_string(s.inputs.cols()) + " in a probe of width " +
                            std::to_string(dim));
    }
  Rng rng(config.seed);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const TrainMode mode{config.dropout, &dropout_rng};

  ProbeModel<Scalar> model = init_probe<Scalar>(dim, static_cast<Eigen::Index>(config.nhid),
                                                static_cast<Eigen::Index>(n_classes), rng);
  AdamState<Scalar> state(model.parameters().size());
  ProbeModel<Scalar> best = model;
  double best_accuracy = -1.0;
  std::size_t since_best = 0;
  std::size_t step = 0;

  TrainReport report;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const ProbeSample<Scalar>*> batch;
  for (std::size_t epoch = 0; epoch < config.max_epoch; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      LossAndGrads<Scalar> lg;
      try {
        lg = loss_and_grads<Scalar>(model, std::span<const ProbeSample<Scalar>* const>(batch), mode);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", step " + std::to_string(step + 1) +
                            ": " + e.what());
      }
      adam_step(model, lg.grads, state, config.learning_rate, ++step);
    }
    if (!model.parameters().allFinite())
      throw NonFiniteLoss("non-finite parameters after epoch " + std::to_string(epoch));

    const double accuracy = evaluate<Scalar>(model, dev);
    report.dev_accuracy_curve.push_back(accuracy);
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best = model;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.tenacity) {
      break;
    }
  }
  report.stopped_reason = since_best >= config.tenacity ? StopReason::kTenacity : StopReason::kMaxEpoch;
  report.test_accuracy = evaluate<Scalar>(best, test);
  return {std::move(best), std::move(report)};
}

void save_checkpoint(const ProbeModel<float>& model, const std::filesystem::path& path) {
  std::string out = "DPM1";
  auto put = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
  };
  put(static_cast<std::uint32_t>(model.dim()));
  put(static_cast<std::uint32_t>(model.hidden()));
  put(static_cast<std::uint32_t>(model.classes()));
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) put(std::bit_cast<std::uint32_t>(model.parameters()(i)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IOFailure("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IOFailure("write failed for " + path.string());
}

ProbeModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IOFailure("cannot open " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  std::size_t pos = 4;
  auto get = [&]() {
    if (bytes.size() < pos + 4) throw CorruptFile(path.string() + ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
  };
  if (bytes.size() < 4 || bytes.compare(0, 4, "DPM1") != 0) throw CorruptFile(path.string() + ": bad magic");
  const auto d = get(), nhid = get(), c = get();
  ProbeModel<float> model(d, nhid, c);
  const auto n = static_cast<std::size_t>(model.parameters().size());
  if (bytes.size() != 16 + 4 * n) throw CorruptFile(path.string() + ": parameter block has wrong length");
  for (std::size_t i = 0; i < n; ++i) model.parameters()(static_cast<Eigen::Index>(i)) = std::bit_cast<float>(get());
  if (!model.parameters().allFinite()) throw CorruptFile(path.string() + ": non-finite parameter");
  return model;
}

std::string report_to_json(const TrainReport& report) {
  nlohmann::json j;
  j["best_epoch"] = report.best_epoch;
  j["dev_accuracy_curve"] = report.dev_accuracy_curve;
  j["test_accuracy"] = report.test_accuracy;
  j["stopped_reason"] = stop_reason_name(report.stopped_reason);
  return j.dump(2);
}

#define DOCPROBE_INSTANTIATE(Scalar)                                                                 \
  template ProbeModel<Scalar> init_probe<Scalar>(Eigen::Index, Eigen::Index, Eigen::Index, Rng&);    \
  template Vector<Scalar> forward<Scalar>(const ProbeModel<Scalar>&,                                 \
                                          const Eigen::Ref<const RowMatrix<Scalar>>&, TrainMode);    \
  template LossAndGrads<Scalar> loss_and_grads<Scalar>(                                              \
      const ProbeModel<Scalar>&, std::span<const ProbeSample<Scalar>* const>, TrainMode);            \
  template LossAndGrads<Scalar> loss_and_grads<Scalar>(const ProbeModel<Scalar>&,                    \
                                                       std::span<const ProbeSample<Scalar>>, TrainMode); \
  template void adam_step<Scalar>(ProbeModel<Scalar>&, const ProbeModel<Scalar>&,                    \
                                  AdamState<Scalar>&, double, std::size_t);                          \
  template std::size_t predict<Scalar>(const ProbeModel<Scalar>&,                                    \
                                       const Eigen::Ref<const RowMatrix<Scalar>>&);                  \
  template double evaluate<Scalar>(const ProbeModel<Scalar>&, std::span<const ProbeSample<Scalar>>); \
  template TrainedProbe<Scalar> train_probe<Scalar>(                                                 \
      const ProbeConfig&, std::span<const ProbeSample<Scalar>>, std::span<const ProbeSample<Scalar>>, \
      std::span<const ProbeSample<Scalar>>, std::size_t);

DOCPROBE_INSTANTIATE(float)
DOCPROBE_INSTANTIATE(double)

#undef DOCPROBE_INSTANTIATE

}  // namespace docprobe
