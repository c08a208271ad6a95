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

#include "ser/balancing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "ser/error.hpp"
#include "ser/log.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

std::map<EmotionLabel, std::vector<std::size_t>> rows_by_class(const LabeledMatrix& data) {
  std::map<EmotionLabel, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < data.rows(); ++i) out[data.y[i]].push_back(i);
  return out;
}

/// Non-majority classes ordered by descending count, ties by label order.
std::vector<EmotionLabel> minority_order(const std::map<EmotionLabel, std::vector<std::size_t>>& classes,
                                         std::size_t majority) {
  std::vector<EmotionLabel> out;
  for (const auto& [label, rows] : classes) {
    if (rows.size() < majority) out.push_back(label);
  }
  std::stable_sort(out.begin(), out.end(), [&](EmotionLabel a, EmotionLabel b) {
    return classes.at(a).size() > classes.at(b).size();
  });
  return out;
}

std::size_t majority_count(const std::map<EmotionLabel, std::vector<std::size_t>>& classes) {
  std::size_t m = 0;
  for (const auto& [_, rows] : classes) m = std::max(m, rows.size());
  return m;
}

/// Candidates sorted along their widest coordinate. A query scans outwards
/// from its own position and stops once the axis gap alone exceeds the
/// current k-th distance, so results equal the exhaustive search exactly.
class AxisIndex {
 public:
  AxisIndex(const LabeledMatrix& data, std::span<const std::size_t> candidates) : data_(data) {
    double widest = -1.0;
    for (std::size_t a = 0; a < data.dim; ++a) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t c : candidates) {
        lo = std::min(lo, data.row(c)[a]);
        hi = std::max(hi, data.row(c)[a]);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        axis_ = a;
      }
    }
    sorted_.reserve(candidates.size());
    for (std::size_t c : candidates) sorted_.push_back({data.row(c)[axis_], c});
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::vector<std::size_t> query(std::size_t query, std::size_t k) const {
    using Entry = std::pair<double, std::size_t>;
    std::vector<Entry> heap;
    heap.reserve(k + 1);
    const auto q = data_.row(query);
    const double qa = q[axis_];
    auto offer = [&](std::size_t c) {
      if (c == query) return;
      const Entry e{squared_distance(q, data_.row(c)), c};
      if (heap.size() < k) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end());
      } else if (e < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end());
      }
    };
    // Every coordinate term is non-negative, so the full squared distance is
    // never below the axis term computed the same way.
    auto beyond = [&](double key) {
      const double d = qa - key;
      return heap.size() == k && d * d > heap.front().first;
    };
    auto split = std::lower_bound(sorted_.begin(), sorted_.end(), std::pair<double, std::size_t>{qa, 0});
    auto right = split;
    auto left = split;
    bool go_right = right != sorted_.end();
    bool go_left = left != sorted_.begin();
    while (k > 0 && (go_right || go_left)) {
      const bool pick_right =
          go_right && (!go_left || std::abs(right->first - qa) <= std::abs(std::prev(left)->first - qa));
      if (pick_right) {
        if (beyond(right->first)) {
          go_right = false;
          continue;
        }
        offer(right->second);
        go_right = ++right != sorted_.end();
      } else {
        if (beyond(std::prev(left)->first)) {
          go_left = false;
          continue;
        }
        --left;
        offer(left->second);
        go_left = left != sorted_.begin();
      }
    }
    std::sort_heap(heap.begin(), heap.end());
    std::vector<std::size_t> out;
    out.reserve(heap.size());
    for (const auto& e : heap) out.push_back(e.second);
    return out;
  }

 private:
  const LabeledMatrix& data_;
  std::size_t axis_ = 0;
  std::vector<std::pair<double, std::size_t>> sorted_;
};

/// kNN lists for every row in `queries`, searched among `candidates`.
std::vector<std::vector<std::size_t>> neighbor_table(const LabeledMatrix& data, std::span<const std::size_t> queries,
                                                     std::span<const std::size_t> candidates, std::size_t k,
                                                     unsigned threads) {
  std::vector<std::vector<std::size_t>> table(queries.size());
  const AxisIndex index(data, candidates);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t q = next++; q < queries.size(); q = next++) table[q] = index.query(queries[q], k);
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(queries.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return table;
}

void require_neighbors(EmotionLabel label, std::size_t count, std::size_t k) {
  if (k == 0) fail(ErrorKind::InvalidArgument, "k_neighbors must be positive");
  if (count <= k) {
    fail(ErrorKind::TooFewSamples, std::string(to_string(label)) + ": " + std::to_string(count) +
                                       " samples, need more than k_neighbors=" + std::to_string(k));
  }
}

std::string synthetic_id(SamplingMethod method, EmotionLabel label, std::size_t counter) {
  return "synthetic/" + std::string(to_string(method)) + "/" + std::string(to_string(label)) + "/" +
         std::to_string(counter);
}

BalanceResult copy_originals(const LabeledMatrix& data) {
  BalanceResult result;
  result.data = data;
  result.original_rows = data.rows();
  return result;
}

void add_synthetic(BalanceResult& result, const LabeledMatrix& data, std::size_t base, std::size_t neighbor,
                   double lambda, SamplingMethod method, EmotionLabel label, std::size_t counter) {
  const auto xi = data.row(base);
  const auto xn = data.row(neighbor);
  std::vector<double> v(data.dim);
  for (std::size_t k = 0; k < data.dim; ++k) v[k] = xi[k] + lambda * (xn[k] - xi[k]);
  result.data.append(v, label, synthetic_id(method, label, counter));
  result.synthetic_base.push_back(base);
}

}  // namespace

void LabeledMatrix::append(std::span<const double> values, EmotionLabel label, std::string id) {
  if (dim == 0 && rows() == 0) dim = values.size();
  if (values.size() != dim) fail(ErrorKind::DimMismatch, "row of length " + std::to_string(values.size()) +
                                                             " in matrix of dim " + std::to_string(dim));
  x.insert(x.end(), values.begin(), values.end());
  y.push_back(label);
  ids.push_back(std::move(id));
}

std::map<EmotionLabel, std::size_t> LabeledMatrix::class_counts() const {
  std::map<EmotionLabel, std::size_t> counts;
  for (auto label : y) ++counts[label];
  return counts;
}

std::string_view to_string(SamplingMethod method) {
  switch (method) {
    case SamplingMethod::None: return "none";
    case SamplingMethod::Undersample: return "undersample";
    case SamplingMethod::Smote: return "smote";
    case SamplingMethod::Adasyn: return "adasyn";
  }
  return "none";
}

std::optional<SamplingMethod> parse_sampling_method(std::string_view name) {
  for (auto m : {SamplingMethod::None, SamplingMethod::Undersample, SamplingMethod::Smote, SamplingMethod::Adasyn}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<std::size_t> nearest_neighbors(const LabeledMatrix& data, std::size_t query,
                                           std::span<const std::size_t> candidates, std::size_t k) {
  // Bounded max-heap keyed on (distance, index).
  using Entry = std::pair<double, std::size_t>;
  std::vector<Entry> heap;
  heap.reserve(k + 1);
  const auto q = data.row(query);
  for (std::size_t c : candidates) {
    if (c == query) continue;
    const Entry e{squared_distance(q, data.row(c)), c};
    if (heap.size() < k) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end());
    } else if (k > 0 && e < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const auto& e : heap) out.push_back(e.second);
  return out;
}

BalanceResult undersample(const LabeledMatrix& data, std::uint64_t seed,
                          std::span<const EmotionLabel> expected_classes) {
  if (data.rows() == 0) fail(ErrorKind::EmptyClass, "no samples to undersample");
  const auto classes = rows_by_class(data);
  for (auto label : expected_classes) {
    if (!classes.count(label)) fail(ErrorKind::EmptyClass, std::string(to_string(label)) + " has no samples");
  }
  std::size_t minority = data.rows();
  for (const auto& [_, rows] : classes) minority = std::min(minority, rows.size());

  std::vector<bool> keep(data.rows(), false);
  for (const auto& [label, rows] : classes) {
    Rng rng = stream_rng(seed, "undersample/" + std::string(to_string(label)));
    std::vector<std::size_t> pool = rows;
    // Partial Fisher-Yates: the first `minority` slots form the sample.
    for (std::size_t i = 0; i < minority; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
      std::swap(pool[i], pool[j]);
      keep[pool[i]] = true;
    }
  }
  BalanceResult result;
  result.data.dim = data.dim;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (keep[i]) result.data.append(data.row(i), data.y[i], data.ids[i]);
  }
  result.original_rows = result.data.rows();
  return result;
}

BalanceResult smote(const LabeledMatrix& data, const SamplerConfig& cfg) {
  BalanceResult result = copy_originals(data);
  const auto classes = rows_by_class(data);
  const std::size_t majority = majority_count(classes);
  for (auto label : minority_order(classes, majority)) {
    const auto& members = classes.at(label);
    require_neighbors(label, members.size(), cfg.k_neighbors);
    const auto nn = neighbor_table(data, members, members, cfg.k_neighbors, cfg.threads);
    Rng rng = stream_rng(cfg.seed, "smote/" + std::string(to_string(label)));
    const std::size_t needed = majority - members.size();
    for (std::size_t s = 0; s < needed; ++s) {
      const std::size_t pick = static_cast<std::size_t>(rng.uniform_index(members.size()));
      const std::size_t neighbor = nn[pick][rng.uniform_index(nn[pick].size())];
      add_synthetic(result, data, members[pick], neighbor, rng.uniform01(), SamplingMethod::Smote, label, s);
    }
  }
  return result;
}

std::vector<double> adasyn_weights(const LabeledMatrix& data, EmotionLabel label, std::size_t k, unsigned threads) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (data.y[i] == label) members.push_back(i);
  }
  std::vector<std::size_t> everyone(data.rows());
  for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = i;
  const auto nn = neighbor_table(data, members, everyone, k, threads);

  std::vector<double> r(members.size());
  double total = 0.0;
  for (std::size_t m = 0; m < members.size(); ++m) {
    std::size_t other = 0;
    for (std::size_t j : nn[m]) other += data.y[j] != label ? 1 : 0;
    r[m] = static_cast<double>(other) / static_cast<double>(k);
    total += r[m];
  }
  for (double& v : r) v = total > 0.0 ? v / total : 1.0 / static_cast<double>(members.size());
  return r;
}

BalanceResult adasyn(const LabeledMatrix& data, const SamplerConfig& cfg) {
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) fail(ErrorKind::InvalidArgument, "ADASYN beta must lie in (0, 1]");
  BalanceResult result = copy_originals(data);
  const auto classes = rows_by_class(data);
  const std::size_t majority = majority_count(classes);
  for (auto label : minority_order(classes, majority)) {
    const auto& members = classes.at(label);
    require_neighbors(label, members.size(), cfg.k_neighbors);
    const auto weights = adasyn_weights(data, label, cfg.k_neighbors, cfg.threads);
    const auto same = neighbor_table(data, members, members, cfg.k_neighbors, cfg.threads);
    Rng rng = stream_rng(cfg.seed, "adasyn/" + std::string(to_string(label)));

    const std::size_t needed = majority - members.size();
    const double budget = static_cast<double>(needed) * cfg.beta;
    // (member position, neighbour row, lambda) per synthetic.
    struct Draft {
      std::size_t member;
      std::size_t neighbor;
      double lambda;
    };
    std::vector<Draft> drafts;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto g = static_cast<std::size_t>(std::llround(weights[m] * budget));
      for (std::size_t s = 0; s < g; ++s) {
        const std::size_t neighbor = same[m][rng.uniform_index(same[m].size())];
        drafts.push_back({m, neighbor, rng.uniform01()});
      }
    }
    if (drafts.size() > needed) {
      // Drop a uniformly random subset, keeping the survivors in generation order.
      std::vector<std::size_t> order(drafts.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      std::vector<bool> keep(drafts.size(), false);
      for (std::size_t i = 0; i < needed; ++i) keep[order[i]] = true;
      std::vector<Draft> kept;
      for (std::size_t i = 0; i < drafts.size(); ++i) {
        if (keep[i]) kept.push_back(drafts[i]);
      }
      drafts = std::move(kept);
    }
    while (drafts.size() < needed) {
      const std::size_t m = static_cast<std::size_t>(rng.uniform_index(members.size()));
      const std::size_t neighbor = same[m][rng.uniform_index(same[m].size())];
      drafts.push_back({m, neighbor, rng.uniform01()});
    }
    for (std::size_t s = 0; s < drafts.size(); ++s) {
      add_synthetic(result, data, members[drafts[s].member], drafts[s].neighbor, drafts[s].lambda,
                    SamplingMethod::Adasyn, label, s);
    }
  }
  return result;
}

BalanceResult balance(const LabeledMatrix& data, const SamplerConfig& cfg) {
  BalanceResult result;
  switch (cfg.method) {
    case SamplingMethod::None: result = copy_originals(data); break;
    case SamplingMethod::Undersample: result = undersample(data, cfg.seed); break;
    case SamplingMethod::Smote: result = smote(data, cfg); break;
    case SamplingMethod::Adasyn: result = adasyn(data, cfg); break;
  }
  log::get("balance")->debug("{}: {} rows -> {} rows", to_string(cfg.method), data.rows(), result.data.rows());
  return result;
}

}  // namespace ser
