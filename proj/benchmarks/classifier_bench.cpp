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

#include <benchmark/benchmark.h>

#include "ser/classifier.hpp"
#include "ser/rng.hpp"

namespace {

void BM_LossAndGradients(benchmark::State& state) {
  const auto d_in = static_cast<std::size_t>(state.range(0));
  const auto model = ser::MlpModel::initialize(ser::head_layer_dims(d_in, 4, 1.0 / 8), 1);
  ser::Rng rng(2);
  ser::RowMatrix<float> x(32, static_cast<Eigen::Index>(d_in));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.normal());
  std::vector<std::size_t> labels;
  for (int i = 0; i < 32; ++i) labels.push_back(rng.uniform_index(4));
  ser::Gradients<float> grads;
  for (auto _ : state) benchmark::DoNotOptimize(ser::loss_and_gradients(model, x, labels, grads));
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_LossAndGradients)->Arg(256)->Arg(1024);

void BM_TrainEpoch(benchmark::State& state) {
  ser::Rng rng(3);
  ser::Dataset data;
  data.x.resize(512, 64);
  for (Eigen::Index i = 0; i < data.x.size(); ++i) data.x.data()[i] = static_cast<float>(rng.normal());
  for (int i = 0; i < 512; ++i) data.labels.push_back(rng.uniform_index(4));
  ser::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.early_stop_patience.reset();
  const auto init = ser::MlpModel::initialize({64, 128, 64, 4}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ser::train(init, data, ser::Dataset{}, cfg));
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
