/**
 * Copyright 2026 The xgbd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "xgbd/error.hpp"
#include "xgbd/graph.hpp"
#include "xgbd/random.hpp"

namespace xgbd {

/// Graph-level pooling of the final node embeddings.
enum class Readout { sum, mean };

inline std::string to_string(Readout r) { return r == Readout::mean ? "mean" : "sum"; }

inline Readout parse_readout(const std::string& s) {
  if (s == "sum") return Readout::sum;
  if (s == "mean") return Readout::mean;
  throw ConfigError("unknown readout '" + s + "' (expected sum or mean)");
}

enum class Optimizer { sgd, adam };

inline std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

/// Architecture and optimizer settings of the GIN classifier.
struct ModelConfig {
  int num_layers = 3;
  int hidden_dim = 32;
  int num_classes = 2;
  double learning_rate = 0.01;
  int epochs = 100;
  int batch_size = 32;
  Readout readout = Readout::sum;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }
};

/// Two-layer MLP applied after neighborhood sum aggregation.
struct GinLayer {
  Matrix w1;
  RowVector b1;
  Matrix w2;
  RowVector b2;
};

/// All trainable weights. Also used as the container for gradients.
struct GinParams {
  std::vector<GinLayer> layers;
  Readout readout = Readout::sum;
  Matrix head_w;
  RowVector head_b;

  [[nodiscard]] int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().w1.rows());
  }
  [[nodiscard]] int hidden_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().w2.cols());
  }
  [[nodiscard]] int num_classes() const { return static_cast<int>(head_w.cols()); }

  /// Visits every tensor in a fixed order as a column-major Eigen::Map-able block.
  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& l : layers) {
      f(l.w1.data(), l.w1.size());
      f(l.b1.data(), l.b1.size());
      f(l.w2.data(), l.w2.size());
      f(l.b2.data(), l.b2.size());
    }
    f(head_w.data(), head_w.size());
    f(head_b.data(), head_b.size());
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<GinParams*>(this)->for_each_tensor(
        [&](double* p, Eigen::Index n) { f(static_cast<const double*>(p), n); });
  }

  [[nodiscard]] std::size_t num_parameters() const {
    std::size_t n = 0;
    for_each_tensor([&](const double*, Eigen::Index k) { n += static_cast<std::size_t>(k); });
    return n;
  }

  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(num_parameters());
    for_each_tensor([&](const double* p, Eigen::Index k) { out.insert(out.end(), p, p + k); });
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != num_parameters()) throw ShapeError("parameter vector size mismatch");
    std::size_t off = 0;
    for_each_tensor([&](double* p, Eigen::Index k) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(k)), p);
      off += static_cast<std::size_t>(k);
    });
  }

  [[nodiscard]] GinParams zeros_like() const {
    GinParams z = *this;
    z.for_each_tensor([](double* p, Eigen::Index k) { std::fill(p, p + k, 0.0); });
    return z;
  }

  /// this += alpha * other
  void add_scaled(const GinParams& other, double alpha) {
    std::vector<const double*> src;
    other.for_each_tensor([&](const double* p, Eigen::Index) { src.push_back(p); });
    std::size_t i = 0;
    for_each_tensor([&](double* p, Eigen::Index k) {
      const double* q = src[i++];
      for (Eigen::Index j = 0; j < k; ++j) p[j] += alpha * q[j];
    });
  }

  void scale(double alpha) {
    for_each_tensor([&](double* p, Eigen::Index k) {
      for (Eigen::Index j = 0; j < k; ++j) p[j] *= alpha;
    });
  }

  friend bool operator==(const GinParams& a, const GinParams& b) {
    return a.layers.size() == b.layers.size() && a.readout == b.readout &&
           a.flatten() == b.flatten() &&
           a.input_dim() == b.input_dim();
  }
};

namespace detail {

inline Matrix glorot(Rng& rng, int fan_in, int fan_out) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  // fill row-major so the draw order does not depend on Eigen's storage order
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < fan_out; ++j) m(i, j) = uniform(rng, -s, s);
  }
  return m;
}

}  // namespace detail

/// Glorot-uniform weights, zero biases.
inline GinParams init_params(const ModelConfig& cfg, int input_dim) {
  cfg.validate();
  if (input_dim < 1) throw ShapeError("input feature width must be >= 1");
  Rng rng = make_rng(derive_seed(cfg.seed, 0x1417));
  GinParams p;
  p.readout = cfg.readout;
  int in = input_dim;
  for (int l = 0; l < cfg.num_layers; ++l) {
    GinLayer layer;
    layer.w1 = detail::glorot(rng, in, cfg.hidden_dim);
    layer.b1 = RowVector::Zero(cfg.hidden_dim);
    layer.w2 = detail::glorot(rng, cfg.hidden_dim, cfg.hidden_dim);
    layer.b2 = RowVector::Zero(cfg.hidden_dim);
    p.layers.push_back(std::move(layer));
    in = cfg.hidden_dim;
  }
  p.head_w = detail::glorot(rng, cfg.hidden_dim, cfg.num_classes);
  p.head_b = RowVector::Zero(cfg.num_classes);
  return p;
}

/// Probability floor applied before taking logs; also caps p at 1 - floor so
/// that every loss stays strictly positive.
inline constexpr double kProbFloor = 1e-12;
inline const double kMaxLoss = -std::log(kProbFloor);
inline const double kMinLoss = -std::log1p(-kProbFloor);

/// Intermediate activations of one forward pass, kept for backpropagation.
struct ForwardCache {
  std::vector<Matrix> h;    // h[l]: input of layer l; h[L]: final node embeddings
  std::vector<Matrix> agg;  // h[l] + sum of (weighted) neighbor rows
  std::vector<Matrix> z1;
  std::vector<Matrix> r1;
  std::vector<Matrix> z2;
  RowVector readout;
  RowVector logits;
  RowVector probs;
};

namespace detail {

inline RowVector softmax(const RowVector& z) {
  const double m = z.maxCoeff();
  RowVector e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

inline double log_sum_exp(const RowVector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

/// out = h + sum over edges of w_e * neighbor rows. `w` may be empty (all 1).
inline Matrix aggregate(const Graph& g, const Matrix& h, std::span<const double> w) {
  Matrix a = h;
  const auto& edges = g.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double we = w.empty() ? 1.0 : w[e];
    a.row(edges[e].v).noalias() += we * h.row(edges[e].u);
    a.row(edges[e].u).noalias() += we * h.row(edges[e].v);
  }
  return a;
}

}  // namespace detail

/// Full forward pass. `edge_weights`, when non-empty, scales every neighbor
/// message of edge e (one weight per entry of g.edges()).
inline ForwardCache forward_cached(const GinParams& params, const Graph& g,
                                   std::span<const double> edge_weights = {}) {
  if (g.feature_dim() != params.input_dim()) {
    throw ShapeError("graph feature width " + std::to_string(g.feature_dim()) +
                     " does not match model input width " + std::to_string(params.input_dim()));
  }
  if (!edge_weights.empty() && edge_weights.size() != g.edges().size()) {
    throw ShapeError("edge weight count does not match edge count");
  }
  ForwardCache c;
  const auto L = params.layers.size();
  c.h.reserve(L + 1);
  c.h.push_back(g.features());
  for (std::size_t l = 0; l < L; ++l) {
    const GinLayer& layer = params.layers[l];
    c.agg.push_back(detail::aggregate(g, c.h[l], edge_weights));
    Matrix z1 = c.agg[l] * layer.w1;
    z1.rowwise() += layer.b1;
    Matrix r1 = z1.cwiseMax(0.0);
    Matrix z2 = r1 * layer.w2;
    z2.rowwise() += layer.b2;
    c.h.push_back(z2.cwiseMax(0.0));
    c.z1.push_back(std::move(z1));
    c.r1.push_back(std::move(r1));
    c.z2.push_back(std::move(z2));
  }
  if (g.num_nodes() == 0) {
    c.readout = RowVector::Zero(params.hidden_dim());
  } else {
    c.readout = c.h.back().colwise().sum();
    if (params.readout == Readout::mean) c.readout /= static_cast<double>(g.num_nodes());
  }
  c.logits = c.readout * params.head_w + params.head_b;
  c.probs = detail::softmax(c.logits);
  return c;
}

/// Class distribution predicted for `g`.
inline RowVector forward(const GinParams& params, const Graph& g) {
  return forward_cached(params, g).probs;
}

/// Cross-entropy from logits, clamped to [kMinLoss, kMaxLoss].
inline double cross_entropy(const RowVector& logits, int y) {
  const double raw = detail::log_sum_exp(logits) - logits(y);
  return std::clamp(raw, kMinLoss, kMaxLoss);
}

inline void check_label(const GinParams& params, int y) {
  if (y < 0 || y >= params.num_classes()) {
    throw ConfigError("label " + std::to_string(y) + " outside [0, " +
                      std::to_string(params.num_classes()) + ")");
  }
}

/// -log p_y for graph `g`.
inline double sample_loss(const GinParams& params, const Graph& g, int y) {
  check_label(params, y);
  return cross_entropy(forward_cached(params, g).logits, y);
}

/// Per-sample objective built on the cross-entropy `l`.
struct LossSpec {
  enum class Kind { standard, trap, lga };
  Kind kind = Kind::standard;
  double gamma = 0.0;
  /// Apply the outer function to the batch-mean cross-entropy instead of to
  /// each sample. Only meaningful for mini-batch training.
  bool batch_mean = false;

  static LossSpec standard() { return {}; }
  /// (l - gamma)^2
  static LossSpec trap(double gamma, bool batch_mean = false) { return {Kind::trap, gamma, batch_mean}; }
  /// (l - gamma) * l
  static LossSpec lga(double gamma) { return {Kind::lga, gamma, false}; }

  [[nodiscard]] double value(double l) const {
    switch (kind) {
      case Kind::trap: return (l - gamma) * (l - gamma);
      case Kind::lga: return (l - gamma) * l;
      case Kind::standard: break;
    }
    return l;
  }
  /// d objective / d l
  [[nodiscard]] double outer_derivative(double l) const {
    switch (kind) {
      case Kind::trap: return 2.0 * (l - gamma);
      case Kind::lga: return 2.0 * l - gamma;
      case Kind::standard: break;
    }
    return 1.0;
  }
};

/// Gradients of one backward pass.
struct Backward {
  GinParams params;
  /// d objective / d edge weight, one per edge; filled only on request.
  std::vector<double> edge_weights;
};

/// Backpropagates d objective / d logits through the network.
inline Backward backward(const GinParams& params, const Graph& g, const ForwardCache& c,
                         const RowVector& dlogits, std::span<const double> edge_weights = {},
                         bool want_edge_grad = false) {
  Backward out;
  GinParams& grad = out.params;
  grad.layers.resize(params.layers.size());
  grad.head_w = c.readout.transpose() * dlogits;
  grad.head_b = dlogits;
  const RowVector dreadout = dlogits * params.head_w.transpose();
  const double pool = (params.readout == Readout::mean && g.num_nodes() > 0)
                          ? 1.0 / static_cast<double>(g.num_nodes())
                          : 1.0;
  Matrix dh = (pool * dreadout).replicate(g.num_nodes(), 1);
  const auto& edges = g.edges();
  if (want_edge_grad) out.edge_weights.assign(edges.size(), 0.0);

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const GinLayer& layer = params.layers[li];
    GinLayer& gl = grad.layers[li];
    Matrix dz2 = (c.z2[li].array() > 0.0).select(dh.array(), 0.0).matrix();
    gl.w2 = c.r1[li].transpose() * dz2;
    gl.b2 = dz2.colwise().sum();
    Matrix dz1 =
        (c.z1[li].array() > 0.0).select((dz2 * layer.w2.transpose()).array(), 0.0).matrix();
    gl.w1 = c.agg[li].transpose() * dz1;
    gl.b1 = dz1.colwise().sum();
    const Matrix dagg = dz1 * layer.w1.transpose();
    if (want_edge_grad) {
      const Matrix& h = c.h[li];
      for (std::size_t e = 0; e < edges.size(); ++e) {
        out.edge_weights[e] += dagg.row(edges[e].v).dot(h.row(edges[e].u)) +
                               dagg.row(edges[e].u).dot(h.row(edges[e].v));
      }
    }
    if (li == 0) break;
    dh = dagg;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double we = edge_weights.empty() ? 1.0 : edge_weights[e];
      dh.row(edges[e].u).noalias() += we * dagg.row(edges[e].v);
      dh.row(edges[e].v).noalias() += we * dagg.row(edges[e].u);
    }
  }
  return out;
}

/// d l / d logits for the clamped cross-entropy.
inline RowVector cross_entropy_logit_grad(const ForwardCache& c, int y) {
  const double raw = detail::log_sum_exp(c.logits) - c.logits(y);
  RowVector d = c.probs;
  d(y) -= 1.0;
  if (raw < kMinLoss) d.setZero();
  return d;
}

struct LossAndGradient {
  double cross_entropy = 0.0;
  double objective = 0.0;
  GinParams gradient;
};

/// Exact gradient of `loss.value(l(f(g), y))` with respect to every parameter.
inline LossAndGradient loss_and_gradients(const GinParams& params, const Graph& g, int y,
                                          const LossSpec& loss = LossSpec::standard()) {
  check_label(params, y);
  const ForwardCache c = forward_cached(params, g);
  LossAndGradient out;
  out.cross_entropy = cross_entropy(c.logits, y);
  out.objective = loss.value(out.cross_entropy);
  const RowVector dlogits = loss.outer_derivative(out.cross_entropy) * cross_entropy_logit_grad(c, y);
  out.gradient = std::move(backward(params, g, c, dlogits).params);
  return out;
}

inline GinParams gradients(const GinParams& params, const Graph& g, int y,
                           const LossSpec& loss = LossSpec::standard()) {
  return loss_and_gradients(params, g, y, loss).gradient;
}

}  // namespace xgbd
