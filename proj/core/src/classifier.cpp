// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ser/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ser/error.hpp"
#include "ser/log.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace {

constexpr char kModelMagic[8] = {'S', 'E', 'R', 'M', 'L', 'P', '0', '1'};
constexpr double kMinProbability = 1e-12;

template <typename Scalar>
RowMatrix<Scalar> relu(const RowMatrix<Scalar>& m) {
  return m.cwiseMax(Scalar(0));
}

/// Row-wise log-softmax.
template <typename Scalar>
RowMatrix<Scalar> log_softmax(const RowMatrix<Scalar>& z) {
  RowMatrix<Scalar> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar m = z.row(i).maxCoeff();
    const Scalar lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

template <typename Scalar>
void check_input(const Mlp<Scalar>& model, Eigen::Index cols) {
  if (static_cast<std::size_t>(cols) != model.input_dim()) {
    fail(ErrorKind::DimMismatch, "input has " + std::to_string(cols) + " features, model expects " +
                                     std::to_string(model.input_dim()));
  }
}

template <typename Scalar>
void check_labels(const Mlp<Scalar>& model, std::span<const std::size_t> labels, Eigen::Index rows) {
  if (labels.size() != static_cast<std::size_t>(rows)) fail(ErrorKind::DimMismatch, "label count does not match rows");
  for (auto l : labels) {
    if (l >= model.n_classes()) fail(ErrorKind::InvalidLabel, "label " + std::to_string(l) + " out of range");
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) fail(ErrorKind::TruncatedFile, "checkpoint ends at byte " + std::to_string(pos));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

struct AdamState {
  std::vector<RowMatrix<float>> mw, vw;
  std::vector<RowVector<float>> mb, vb;
  std::size_t step = 0;
};

void apply_update(MlpModel& model, const Gradients<float>& g, const TrainConfig& cfg, AdamState& adam) {
  const auto lr = static_cast<float>(cfg.learning_rate);
  if (cfg.optimizer == OptimizerKind::Sgd) {
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
      model.weights[l] -= lr * g.weights[l];
      model.biases[l] -= lr * g.biases[l];
    }
    return;
  }
  const auto b1 = static_cast<float>(cfg.adam_beta1);
  const auto b2 = static_cast<float>(cfg.adam_beta2);
  const auto eps = static_cast<float>(cfg.adam_epsilon);
  ++adam.step;
  const float c1 = 1.0f - static_cast<float>(std::pow(cfg.adam_beta1, static_cast<double>(adam.step)));
  const float c2 = 1.0f - static_cast<float>(std::pow(cfg.adam_beta2, static_cast<double>(adam.step)));
  auto step = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = b1 * m + (1.0f - b1) * grad;
    v = b2 * v + (1.0f - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    step(model.weights[l], adam.mw[l], adam.vw[l], g.weights[l]);
    step(model.biases[l], adam.mb[l], adam.vb[l], g.biases[l]);
  }
}

}  // namespace

std::vector<std::size_t> head_layer_dims(std::size_t d_in, std::size_t n_classes, double width_multiplier) {
  if (!(width_multiplier > 0.0)) fail(ErrorKind::InvalidArgument, "width multiplier must be positive");
  std::vector<std::size_t> dims = {d_in};
  for (auto w : kHeadHiddenWidths) {
    dims.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(w * width_multiplier))));
  }
  dims.push_back(n_classes);
  return dims;
}

template <typename Scalar>
std::size_t Mlp<Scalar>::n_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros(std::vector<std::size_t> dims) {
  if (dims.size() < 2) fail(ErrorKind::InvalidArgument, "a model needs at least input and output dims");
  for (auto d : dims) {
    if (d == 0) fail(ErrorKind::InvalidArgument, "layer dims must be positive");
  }
  Mlp m;
  m.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(m.layer_dims[l]);
    const auto fan_out = static_cast<Eigen::Index>(m.layer_dims[l + 1]);
    m.weights.push_back(RowMatrix<Scalar>::Zero(fan_in, fan_out));
    m.biases.push_back(RowVector<Scalar>::Zero(fan_out));
  }
  return m;
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::initialize(std::vector<std::size_t> dims, std::uint64_t seed) {
  Mlp m = zeros(std::move(dims));
  Rng rng = stream_rng(seed, "mlp/init");
  for (auto& w : m.weights) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows()));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<Scalar>((2.0 * rng.uniform01() - 1.0) * bound);
    }
  }
  return m;
}

template <typename Scalar>
bool Mlp<Scalar>::operator==(const Mlp& other) const {
  if (layer_dims != other.layer_dims) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

template <typename Scalar>
RowMatrix<Scalar> logits(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x) {
  check_input(model, x.cols());
  RowMatrix<Scalar> h = x;
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    RowMatrix<Scalar> z = (h * model.weights[l]).rowwise() + model.biases[l];
    h = l + 1 < model.n_layers() ? relu(z) : std::move(z);
  }
  return h;
}

template <typename Scalar>
RowMatrix<Scalar> forward_batch(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x) {
  return log_softmax(logits(model, x)).array().exp();
}

template <typename Scalar>
std::vector<Scalar> forward(const Mlp<Scalar>& model, std::span<const Scalar> x) {
  if (x.size() != model.input_dim()) check_input(model, static_cast<Eigen::Index>(x.size()));
  RowMatrix<Scalar> row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = x[k];
  const RowMatrix<Scalar> p = forward_batch(model, row);
  return {p.data(), p.data() + p.size()};
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) fail(ErrorKind::InvalidLabel, "label " + std::to_string(label) + " out of range");
  return -std::log(std::clamp(probs[label], kMinProbability, 1.0));
}

template <typename Scalar>
Scalar mean_loss(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x, std::span<const std::size_t> labels) {
  check_labels(model, labels, x.rows());
  if (labels.empty()) return Scalar(0);
  const RowMatrix<Scalar> lp = log_softmax(logits(model, x));
  Scalar total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) total -= lp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i]));
  return total / static_cast<Scalar>(labels.size());
}

template <typename Scalar>
Scalar loss_and_gradients(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x, std::span<const std::size_t> labels,
                          Gradients<Scalar>& grads) {
  check_input(model, x.cols());
  check_labels(model, labels, x.rows());
  const std::size_t L = model.n_layers();
  const auto batch = static_cast<Scalar>(std::max<std::size_t>(1, labels.size()));

  // activations[l] is the input to layer l; pre[l] its affine output.
  std::vector<RowMatrix<Scalar>> activations(L + 1), pre(L);
  activations[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    pre[l] = (activations[l] * model.weights[l]).rowwise() + model.biases[l];
    activations[l + 1] = l + 1 < L ? relu(pre[l]) : pre[l];
  }
  const RowMatrix<Scalar> lp = log_softmax(pre[L - 1]);

  Scalar loss = 0;
  RowMatrix<Scalar> delta = lp.array().exp();  // dLoss/dlogits = (softmax - onehot) / batch
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(labels[i]);
    loss -= lp(r, c);
    delta(r, c) -= Scalar(1);
  }
  delta /= batch;

  grads.weights.resize(L);
  grads.biases.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    grads.weights[l] = activations[l].transpose() * delta;
    grads.biases[l] = delta.colwise().sum();
    if (l > 0) {
      RowMatrix<Scalar> back = delta * model.weights[l].transpose();
      delta = back.cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return loss / batch;
}

template <typename Scalar>
std::vector<std::size_t> predict(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x) {
  const RowMatrix<Scalar> z = logits(model, x);
  std::vector<std::size_t> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c) {
      if (z(i, c) > z(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

template struct Mlp<float>;
template struct Mlp<double>;
template RowMatrix<float> logits(const Mlp<float>&, const RowMatrix<float>&);
template RowMatrix<double> logits(const Mlp<double>&, const RowMatrix<double>&);
template RowMatrix<float> forward_batch(const Mlp<float>&, const RowMatrix<float>&);
template RowMatrix<double> forward_batch(const Mlp<double>&, const RowMatrix<double>&);
template std::vector<float> forward(const Mlp<float>&, std::span<const float>);
template std::vector<double> forward(const Mlp<double>&, std::span<const double>);
template float mean_loss(const Mlp<float>&, const RowMatrix<float>&, std::span<const std::size_t>);
template double mean_loss(const Mlp<double>&, const RowMatrix<double>&, std::span<const std::size_t>);
template float loss_and_gradients(const Mlp<float>&, const RowMatrix<float>&, std::span<const std::size_t>,
                                  Gradients<float>&);
template double loss_and_gradients(const Mlp<double>&, const RowMatrix<double>&, std::span<const std::size_t>,
                                   Gradients<double>&);
template std::vector<std::size_t> predict(const Mlp<float>&, const RowMatrix<float>&);
template std::vector<std::size_t> predict(const Mlp<double>&, const RowMatrix<double>&);

TrainResult train(MlpModel model, const Dataset& train_data, const Dataset& validation, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "learning rate must be positive");
  if (cfg.batch_size == 0) fail(ErrorKind::InvalidArgument, "batch size must be positive");
  if (train_data.rows() == 0 && cfg.epochs > 0) fail(ErrorKind::EmptyTrainingSet, "no training samples");
  check_input(model, train_data.x.cols());

  TrainResult result;
  result.model = model;
  if (cfg.epochs == 0) return result;

  AdamState adam;
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    adam.mw.push_back(RowMatrix<float>::Zero(model.weights[l].rows(), model.weights[l].cols()));
    adam.vw.push_back(adam.mw.back());
    adam.mb.push_back(RowVector<float>::Zero(model.biases[l].cols()));
    adam.vb.push_back(adam.mb.back());
  }

  const bool early_stop = cfg.early_stop_patience.has_value() && validation.rows() > 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  MlpModel best = model;

  Rng rng = stream_rng(cfg.seed, "mlp/shuffle");
  std::vector<std::size_t> order(train_data.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Gradients<float> grads;
  RowMatrix<float> batch_x;
  std::vector<std::size_t> batch_y;
  auto logger = log::get("train");

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_x.resize(static_cast<Eigen::Index>(n), train_data.x.cols());
      batch_y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i)) = train_data.x.row(static_cast<Eigen::Index>(order[start + i]));
        batch_y[i] = train_data.labels[order[start + i]];
      }
      const float loss = loss_and_gradients(model, batch_x, batch_y, grads);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::NonFiniteLoss, "loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                                           ", batch starting at sample " + std::to_string(start));
      }
      epoch_loss += static_cast<double>(loss) * static_cast<double>(n);
      apply_update(model, grads, cfg, adam);
    }
    EpochLoss point{epoch, epoch_loss / static_cast<double>(order.size()), std::nullopt};
    if (validation.rows() > 0) {
      const double val = mean_loss(model, validation.x, validation.labels);
      if (!std::isfinite(val)) fail(ErrorKind::NonFiniteLoss, "validation loss is not finite at epoch " + std::to_string(epoch));
      point.validation_loss = val;
    }
    result.curve.push_back(point);
    logger->debug("epoch {} train_loss {:.6f}", epoch, point.train_loss);

    if (early_stop) {
      if (*point.validation_loss < best_val) {
        best_val = *point.validation_loss;
        best = model;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= *cfg.early_stop_patience) {
        logger->info("early stop at epoch {} (best epoch {})", epoch, result.best_epoch);
        break;
      }
    }
  }
  if (early_stop) {
    result.model = std::move(best);
  } else {
    result.model = std::move(model);
    result.best_epoch = result.curve.size();
  }
  return result;
}

std::vector<std::uint8_t> serialize_model(const MlpModel& model) {
  std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
  put_u32(out, static_cast<std::uint32_t>(model.layer_dims.size()));
  for (auto d : model.layer_dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(model.weights[l].data()[i]));
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(model.biases[l].data()[i]));
  }
  return out;
}

MlpModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 8) != 0) fail(ErrorKind::BadMagic, "missing SERMLP01 magic");
  std::size_t pos = 8;
  const std::uint32_t n_dims = get_u32(bytes, pos);
  if (n_dims < 2 || n_dims > 64) fail(ErrorKind::ParseError, "implausible layer count " + std::to_string(n_dims));
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(get_u32(bytes, pos));
  MlpModel model = MlpModel::zeros(dims);
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i) model.weights[l].data()[i] = std::bit_cast<float>(get_u32(bytes, pos));
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) model.biases[l].data()[i] = std::bit_cast<float>(get_u32(bytes, pos));
  }
  if (pos != bytes.size()) fail(ErrorKind::ParseError, "trailing bytes after checkpoint tensors");
  return model;
}

void write_model(const MlpModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MlpModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_model(bytes);
}

std::string loss_curve_csv(std::span<const EpochLoss> curve) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,train_loss,validation_loss\n";
  for (const auto& p : curve) {
    out << p.epoch << ',' << p.train_loss << ',';
    if (p.validation_loss) out << *p.validation_loss;
    out << '\n';
  }
  return out.str();
}

}  // namespace ser
