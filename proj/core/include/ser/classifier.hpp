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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ser {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Default hidden widths of the classification head.
inline const std::vector<std::size_t> kHeadHiddenWidths = {4096, 2048, 1024, 512};

/// [d_in, 4096, 2048, 1024, 512, C] with hidden widths scaled by
/// `width_multiplier` (each at least 1).
std::vector<std::size_t> head_layer_dims(std::size_t d_in, std::size_t n_classes, double width_multiplier = 1.0);

/// Feed-forward classifier: affine layers with ReLU between them and softmax
/// on the output. Weight matrices are fan_in x fan_out.
template <typename Scalar>
struct Mlp {
  std::vector<std::size_t> layer_dims;
  std::vector<RowMatrix<Scalar>> weights;
  std::vector<RowVector<Scalar>> biases;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t n_classes() const { return layer_dims.back(); }
  std::size_t n_layers() const { return weights.size(); }
  std::size_t n_parameters() const;

  /// Zero-initialised model.
  static Mlp zeros(std::vector<std::size_t> dims);
  /// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static Mlp initialize(std::vector<std::size_t> dims, std::uint64_t seed);

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out;
    out.layer_dims = layer_dims;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<Other>());
    return out;
  }

  bool operator==(const Mlp& other) const;
};

using MlpModel = Mlp<float>;

/// Output logits for a batch (rows are samples).
template <typename Scalar>
RowMatrix<Scalar> logits(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x);

/// Class probabilities for one input. Throws DimMismatch.
template <typename Scalar>
std::vector<Scalar> forward(const Mlp<Scalar>& model, std::span<const Scalar> x);

/// Row-wise softmax probabilities for a batch. Throws DimMismatch.
template <typename Scalar>
RowMatrix<Scalar> forward_batch(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x);

/// -log(probs[label]), with the probability clamped away from zero.
/// Throws InvalidLabel.
double cross_entropy(std::span<const double> probs, std::size_t label);

template <typename Scalar>
struct Gradients {
  std::vector<RowMatrix<Scalar>> weights;
  std::vector<RowVector<Scalar>> biases;
};

/// Mean cross-entropy over the batch, computed with a stable log-softmax.
template <typename Scalar>
Scalar mean_loss(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x, std::span<const std::size_t> labels);

/// Mean cross-entropy and its gradient with respect to every parameter.
template <typename Scalar>
Scalar loss_and_gradients(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x, std::span<const std::size_t> labels,
                          Gradients<Scalar>& grads);

/// Arg-max class per row; ties go to the lowest index.
template <typename Scalar>
std::vector<std::size_t> predict(const Mlp<Scalar>& model, const RowMatrix<Scalar>& x);

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double learning_rate = 1e-5;  // constant for the whole run
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::optional<std::size_t> early_stop_patience = 5;
};

/// Samples and integer class labels for training or evaluation.
struct Dataset {
  RowMatrix<float> x;
  std::vector<std::size_t> labels;

  std::size_t rows() const { return labels.size(); }
};

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> validation_loss;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLoss> curve;
  std::size_t best_epoch = 0;  // 0 when the initial model is returned
};

/// Mini-batch training with a seeded shuffle each epoch. With a patience set
/// and a non-empty validation set, returns the parameters of the best
/// validation epoch; otherwise the final parameters. Throws NonFiniteLoss.
TrainResult train(MlpModel model, const Dataset& train_data, const Dataset& validation, const TrainConfig& cfg);

// Checkpoints: "SERMLP01" | u32 n_dims | n_dims x u32 | per layer: weights
// (fan_in x fan_out, row-major) then bias (fan_out), all little-endian f32.
std::vector<std::uint8_t> serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::span<const std::uint8_t> bytes);
void write_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel read_model(const std::filesystem::path& path);

/// "epoch,train_loss,validation_loss" rows.
std::string loss_curve_csv(std::span<const EpochLoss> curve);

}  // namespace ser
