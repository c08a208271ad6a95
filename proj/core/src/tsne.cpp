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

#include "ser/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "ser/error.hpp"
#include "ser/log.hpp"
#include "ser/rng.hpp"

namespace ser {

namespace {

constexpr int kMaxBisectionSteps = 64;
constexpr double kLogPerplexityTolerance = 1e-5;
constexpr double kDuplicateJitter = 1e-10;
constexpr double kSvgWidth = 1200.0;
constexpr double kSvgHeight = 800.0;
constexpr double kSvgMargin = 40.0;

DenseMatrix squared_distances(const DenseMatrix& x) {
  const Eigen::Index n = x.rows();
  DenseMatrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

/// Natural-log entropy of row i's kernel at precision beta; fills `row`.
double row_entropy(const DenseMatrix& d, Eigen::Index i, double d_min, double beta, std::vector<double>& row) {
  const Eigen::Index n = d.cols();
  double sum = 0.0;
  double weighted = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) {
      row[static_cast<std::size_t>(j)] = 0.0;
      continue;
    }
    const double shifted = d(i, j) - d_min;
    const double v = std::exp(-beta * shifted);
    row[static_cast<std::size_t>(j)] = v;
    sum += v;
    weighted += shifted * v;
  }
  for (auto& v : row) v /= sum;
  return std::log(sum) + beta * weighted / sum;
}

void jitter_duplicates(DenseMatrix& x, std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (x(a, k) != x(b, k)) return x(a, k) < x(b, k);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), row_less);
  Rng rng = stream_rng(seed, "tsne/jitter");
  std::size_t jittered = 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (x.row(order[i]) != x.row(order[i - 1])) continue;
    for (Eigen::Index k = 0; k < x.cols(); ++k) x(order[i], k) += kDuplicateJitter * rng.normal();
    ++jittered;
  }
  if (jittered > 0) log::get("tsne")->warn("jittered {} duplicate input rows", jittered);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

DenseMatrix conditional_affinities(const DenseMatrix& x, double perplexity) {
  const Eigen::Index n = x.rows();
  if (n < 4) fail(ErrorKind::InvalidArgument, "t-SNE needs at least 4 points");
  if (!(perplexity >= 1.0)) fail(ErrorKind::InvalidArgument, "perplexity must be at least 1");
  if (!x.allFinite()) fail(ErrorKind::InvalidArgument, "input rows must be finite");
  const DenseMatrix d = squared_distances(x);
  const double target = std::log(perplexity);

  DenseMatrix c(n, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  std::size_t unconverged = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = 0.0;
    double d_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      d_min = std::min(d_min, d(i, j));
      d_max = std::max(d_max, d(i, j));
      d_sum += d(i, j);
    }
    if (d_max == 0.0) fail(ErrorKind::DegenerateRow, "point " + std::to_string(i) + " coincides with every other point");

    // Bisection in log(beta), bracketed by doubling from a scale-aware start.
    double beta = static_cast<double>(n - 1) / d_sum;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int step = 0; step < kMaxBisectionSteps; ++step) {
      const double h = row_entropy(d, i, d_min, beta, row);
      const double diff = h - target;
      if (std::abs(diff) < kLogPerplexityTolerance) {
        converged = true;
        break;
      }
      if (diff > 0) {  // too flat: sharpen
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : std::sqrt(beta * hi);
      } else {
        hi = beta;
        beta = lo == 0.0 ? beta / 2.0 : std::sqrt(lo * beta);
      }
    }
    if (!converged) {
      row_entropy(d, i, d_min, beta, row);
      ++unconverged;
    }
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = row[static_cast<std::size_t>(j)];
  }
  if (unconverged > 0) {
    log::get("tsne")->warn("{} rows did not reach the target perplexity within {} steps", unconverged,
                           kMaxBisectionSteps);
  }
  return c;
}

DenseMatrix symmetrize(const DenseMatrix& conditional) {
  const Eigen::Index n = conditional.rows();
  DenseMatrix p(n, n);
  const double denom = 2.0 * static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      p(i, j) = i == j ? 0.0 : (conditional(i, j) + conditional(j, i)) / denom;
      total += p(i, j);
    }
  }
  if (total > 0.0) p /= total;
  return p;
}

double kl_divergence(const DenseMatrix& p, const DenseMatrix& y) {
  const Eigen::Index n = y.rows();
  DenseMatrix num(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += num(i, j);
    }
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || p(i, j) <= 0.0) continue;
      kl += p(i, j) * std::log(p(i, j) * z / num(i, j));
    }
  }
  return kl;
}

DenseMatrix kl_gradient(const DenseMatrix& p, const DenseMatrix& y) {
  const Eigen::Index n = y.rows();
  DenseMatrix num(n, n);
  double z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num(i, i) = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += num(i, j);
    }
  }
  DenseMatrix grad = DenseMatrix::Zero(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double coeff = 4.0 * (p(i, j) - num(i, j) / z) * num(i, j);
      grad.row(i) += coeff * (y.row(i) - y.row(j));
    }
  }
  return grad;
}

TsneResult run_tsne(const DenseMatrix& x, const TsneConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (n < 4) fail(ErrorKind::InvalidArgument, "t-SNE needs at least 4 points");
  if (cfg.output_dims == 0) fail(ErrorKind::InvalidArgument, "output_dims must be positive");
  if (cfg.enforce_perplexity_bound && !(cfg.perplexity < static_cast<double>(n - 1) / 3.0)) {
    fail(ErrorKind::InvalidArgument, "perplexity " + std::to_string(cfg.perplexity) + " must be below (n - 1) / 3 = " +
                                         std::to_string(static_cast<double>(n - 1) / 3.0));
  }
  DenseMatrix input = x;
  jitter_duplicates(input, cfg.seed);
  const DenseMatrix p = symmetrize(conditional_affinities(input, cfg.perplexity));

  const auto dims = static_cast<Eigen::Index>(cfg.output_dims);
  Rng rng = stream_rng(cfg.seed, "tsne/init");
  TsneResult result;
  DenseMatrix& y = result.embedding;
  y.resize(n, dims);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = cfg.init_sigma * rng.normal();

  DenseMatrix update = DenseMatrix::Zero(n, dims);
  DenseMatrix gains = DenseMatrix::Ones(n, dims);
  result.kl_trace.reserve(cfg.iterations);
  const DenseMatrix p_exaggerated = p * cfg.early_exaggeration;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const bool exaggerate = it < cfg.exaggeration_iterations;
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const DenseMatrix grad = kl_gradient(exaggerate ? p_exaggerated : p, y);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      double& g = gains.data()[k];
      const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, cfg.min_gain);
      update.data()[k] = momentum * update.data()[k] - cfg.step_size * g * grad.data()[k];
      y.data()[k] += update.data()[k];
    }
    y.rowwise() -= y.colwise().mean();

    const double kl = kl_divergence(p, y);
    if (!std::isfinite(kl)) fail(ErrorKind::NonFiniteKL, "KL divergence is not finite at iteration " + std::to_string(it + 1));
    result.kl_trace.push_back(kl);
  }
  return result;
}

std::vector<std::size_t> stratified_subsample(std::span<const std::string> strata, std::size_t cap,
                                              std::uint64_t seed) {
  const std::size_t n = strata.size();
  std::vector<std::size_t> out;
  if (n <= cap) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[strata[i]].push_back(i);

  struct Share {
    const std::string* key;
    std::size_t quota;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [key, members] : groups) {
    const double exact = static_cast<double>(cap) * static_cast<double>(members.size()) / static_cast<double>(n);
    const auto quota = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({&key, quota, exact - static_cast<double>(quota)});
    assigned += quota;
  }
  std::vector<std::size_t> by_remainder(shares.size());
  std::iota(by_remainder.begin(), by_remainder.end(), std::size_t{0});
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t k = 0; assigned < cap && k < by_remainder.size(); ++k, ++assigned) ++shares[by_remainder[k]].quota;

  for (const auto& share : shares) {
    std::vector<std::size_t> members = groups[*share.key];
    Rng rng = stream_rng(seed, "tsne/subsample/" + *share.key);
    rng.shuffle(members);
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(share.quota));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_tsne_csv(const std::filesystem::path& path, std::span<const TsnePoint> points) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out.precision(17);
  out << "id,x,y,dataset_id,emotion\n";
  for (const auto& p : points) out << p.id << ',' << p.x << ',' << p.y << ',' << p.dataset_id << ',' << p.emotion << '\n';
}

std::string render_tsne_svg(std::span<const TsnePoint> points) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                             "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
  std::map<std::string, std::size_t> colour_of;
  std::map<std::string, std::size_t> glyph_of;
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (!points.empty()) {
    min_x = max_x = points[0].x;
    min_y = max_y = points[0].y;
  }
  for (const auto& p : points) {
    colour_of.emplace(p.dataset_id, 0);
    glyph_of.emplace(p.emotion, 0);
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  std::size_t k = 0;
  for (auto& [name, idx] : colour_of) idx = k++;
  k = 0;
  for (auto& [name, idx] : glyph_of) idx = k++;

  const double legend_width = 220.0;
  const double plot_w = kSvgWidth - legend_width - 2 * kSvgMargin;
  const double plot_h = kSvgHeight - 2 * kSvgMargin;
  const double span_x = max_x > min_x ? max_x - min_x : 1.0;
  const double span_y = max_y > min_y ? max_y - min_y : 1.0;

  auto glyph = [](std::ostringstream& out, std::size_t shape, double cx, double cy, const char* colour) {
    const double r = 4.0;
    switch (shape % 5) {
      case 0: out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\""; break;
      case 1: out << "<rect x=\"" << cx - r << "\" y=\"" << cy - r << "\" width=\"" << 2 * r << "\" height=\"" << 2 * r << "\""; break;
      case 2: out << "<polygon points=\"" << cx << ',' << cy - r << ' ' << cx - r << ',' << cy + r << ' ' << cx + r << ',' << cy + r << "\""; break;
      case 3: out << "<polygon points=\"" << cx << ',' << cy - r << ' ' << cx + r << ',' << cy << ' ' << cx << ',' << cy + r << ' ' << cx - r << ',' << cy << "\""; break;
      default:
        out << "<path d=\"M" << cx - r << ',' << cy - r << "L" << cx + r << ',' << cy + r << "M" << cx - r << ',' << cy + r
            << "L" << cx + r << ',' << cy - r << "\" stroke=\"" << colour << "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
        return;
    }
    out << " fill=\"" << colour << "\" fill-opacity=\"0.7\"/>\n";
  };

  std::ostringstream out;
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth << "\" height=\"" << kSvgHeight
      << "\" viewBox=\"0 0 " << kSvgWidth << ' ' << kSvgHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : points) {
    const double cx = kSvgMargin + (p.x - min_x) / span_x * plot_w;
    const double cy = kSvgMargin + (max_y - p.y) / span_y * plot_h;
    glyph(out, glyph_of[p.emotion], cx, cy, kPalette[colour_of[p.dataset_id] % std::size(kPalette)]);
  }
  double ly = kSvgMargin;
  const double lx = kSvgWidth - legend_width;
  for (const auto& [name, idx] : colour_of) {
    out << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[idx % std::size(kPalette)]
        << "\"/><text x=\"" << lx + 16 << "\" y=\"" << ly + 1 << "\" font-size=\"12\" font-family=\"sans-serif\">"
        << xml_escape(name) << "</text>\n";
    ly += 18;
  }
  ly += 12;
  for (const auto& [name, idx] : glyph_of) {
    glyph(out, idx, lx + 5, ly - 3, "#333333");
    out << "<text x=\"" << lx + 16 << "\" y=\"" << ly + 1 << "\" font-size=\"12\" font-family=\"sans-serif\">"
        << xml_escape(name) << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ser
