#pragma once

// Dual-branch graph classifier with a learnable softmax gate.
//
// Each branch encodes one graph with a stack of message-passing layers and
// mean-pools node embeddings into a graph vector g_n. With two branches the
// vectors are fused as g = a_1 g_1 + a_2 g_2, a = softmax(w); with one
// branch the gate is bypassed. A fully connected head maps g to two class
// probabilities. Every parameter has an exact reverse-mode gradient.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gemini/config.hpp"
#include "gemini/features.hpp"
#include "gemini/graph.hpp"
#include "gemini/propagation.hpp"

namespace gemini {

using Vector2 = Eigen::Vector2d;

// A learnable value with a same-shape gradient buffer.
struct Tensor2 {
  Matrix value;
  Matrix grad;

  Tensor2() = default;
  Tensor2(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  bool empty() const { return value.size() == 0; }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Weights of one message-passing layer. Only GIN uses bias, w2 and b2.
struct ConvLayer {
  Tensor2 w;
  Tensor2 b;
  Tensor2 w2;
  Tensor2 b2;
};

struct Branch {
  std::vector<ConvLayer> layers;
};

struct DenseLayer {
  Tensor2 w;
  Tensor2 b;
};

struct ModelParams {
  std::vector<Branch> branches; // [0] = FCG (or the single graph), [1] = PCG
  Tensor2 gate{2, 1};
  std::vector<DenseLayer> head;
};

namespace detail {

template <typename Params, typename F>
void visit_params(Params &p, F &&f) {
  auto visit = [&](const std::string &name, auto &t) {
    if (!t.empty()) f(name, t);
  };
  for (std::size_t bi = 0; bi < p.branches.size(); ++bi) {
    auto &br = p.branches[bi];
    for (std::size_t li = 0; li < br.layers.size(); ++li) {
      const std::string prefix = "branch" + std::to_string(bi) + ".layer" + std::to_string(li) + ".";
      visit(prefix + "w", br.layers[li].w);
      visit(prefix + "b", br.layers[li].b);
      visit(prefix + "w2", br.layers[li].w2);
      visit(prefix + "b2", br.layers[li].b2);
    }
  }
  visit(std::string("gate.w"), p.gate);
  for (std::size_t i = 0; i < p.head.size(); ++i) {
    const std::string prefix = "head" + std::to_string(i) + ".";
    visit(prefix + "w", p.head[i].w);
    visit(prefix + "b", p.head[i].b);
  }
}

} // namespace detail

// Calls f(name, tensor) for every non-empty parameter in a fixed order.
template <typename F>
void for_each_param(ModelParams &p, F &&f) {
  detail::visit_params(p, std::forward<F>(f));
}

template <typename F>
void for_each_param(const ModelParams &p, F &&f) {
  detail::visit_params(p, std::forward<F>(f));
}

inline void zero_grad(ModelParams &p) {
  for_each_param(p, [](const std::string &, Tensor2 &t) { t.zero_grad(); });
}

inline std::size_t parameter_count(const ModelParams &p) {
  std::size_t n = 0;
  for_each_param(p, [&](const std::string &, const Tensor2 &t) { n += static_cast<std::size_t>(t.value.size()); });
  return n;
}

/// Builds zero-valued parameters of the right shapes for `cfg`.
inline ModelParams allocate_params(const ModelConfig &cfg) {
  validate(cfg);
  ModelParams p;
  const Eigen::Index in = cfg.input_width();
  const Eigen::Index d = cfg.dim;
  for (int b = 0; b < cfg.branch_count(); ++b) {
    Branch br;
    if (cfg.arch == ArchKind::SGC) {
      ConvLayer l;
      l.w = Tensor2(in, d);
      br.layers.push_back(std::move(l));
    } else {
      for (int i = 0; i < cfg.layers; ++i) {
        const Eigen::Index fan_in = i == 0 ? in : d;
        ConvLayer l;
        switch (cfg.arch) {
        case ArchKind::GIN:
          l.w = Tensor2(fan_in, d);
          l.b = Tensor2(1, d);
          l.w2 = Tensor2(d, d);
          l.b2 = Tensor2(1, d);
          break;
        case ArchKind::SAGE: l.w = Tensor2(2 * fan_in, d); break;
        default: l.w = Tensor2(fan_in, d); break;
        }
        br.layers.push_back(std::move(l));
      }
    }
    p.branches.push_back(std::move(br));
  }
  for (int i = 0; i < cfg.fc; ++i) {
    const Eigen::Index out = i + 1 == cfg.fc ? 2 : d;
    p.head.push_back({Tensor2(d, out), Tensor2(1, out)});
  }
  return p;
}

/// Glorot-uniform weights, zero biases, zero gate. Deterministic per seed.
inline ModelParams init_params(const ModelConfig &cfg, std::uint64_t seed) {
  ModelParams p = allocate_params(cfg);
  std::mt19937_64 rng(seed);
  for_each_param(p, [&](const std::string &name, Tensor2 &t) {
    const bool is_weight = name.ends_with(".w") || name.ends_with(".w2");
    if (!is_weight || name == "gate.w") return;
    const double limit = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = dist(rng);
  });
  return p;
}

// Softmax over a short vector, shifted by the max for stability.
inline Eigen::VectorXd softmax(const Eigen::VectorXd &z) {
  Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

/// Column-wise mean over nodes.
inline RowVector global_pool(const Matrix &h) {
  if (h.rows() == 0) throw ValidationError("cannot pool an embedding with zero rows");
  return h.colwise().mean();
}

/// g = a_1 g_1 + a_2 g_2 with a = softmax(gate).
inline RowVector gated_fusion(const RowVector &g1, const RowVector &g2, const Eigen::Vector2d &gate) {
  if (g1.size() != g2.size()) throw ValidationError("gated fusion needs equal-length embeddings");
  const Eigen::VectorXd a = softmax(gate);
  return a(0) * g1 + a(1) * g2;
}

/// One message-passing step. For SGC this is the bare normalized
/// propagation; the branch applies its single linear map after the last step.
inline Matrix propagate(ArchKind arch, const Propagator &prop, const Matrix &h, const ConvLayer &layer,
                        int layer_index = 0) {
  auto mismatch = [&](const char *what) {
    return ValidationError(detail::sprintf("layer %d: %s", layer_index, what));
  };
  if (arch != ArchKind::MLP && h.rows() != prop.node_count) throw mismatch("feature rows != node count");
  switch (arch) {
  case ArchKind::GCN:
    if (h.cols() != layer.w.value.rows()) throw mismatch("input width does not match weight rows");
    return relu(prop.apply(h) * layer.w.value);
  case ArchKind::SGC: return prop.apply(h);
  case ArchKind::GIN: {
    if (h.cols() != layer.w.value.rows()) throw mismatch("input width does not match weight rows");
    Matrix hidden = relu((prop.apply(h) * layer.w.value).rowwise() + RowVector(layer.b.value));
    return relu((hidden * layer.w2.value).rowwise() + RowVector(layer.b2.value));
  }
  case ArchKind::SAGE: {
    if (2 * h.cols() != layer.w.value.rows()) throw mismatch("input width does not match weight rows");
    Matrix cat(h.rows(), 2 * h.cols());
    cat << h, prop.apply(h);
    return relu(cat * layer.w.value);
  }
  case ArchKind::MLP:
    if (h.cols() != layer.w.value.rows()) throw mismatch("input width does not match weight rows");
    return relu(h * layer.w.value);
  }
  return {};
}

// Features and propagation operator for one branch input.
struct BranchInput {
  Matrix features;
  Propagator prop;
};

struct PreparedSample {
  Label label = Label::Benign;
  std::vector<BranchInput> inputs;
};

inline std::vector<Graph> branch_graphs(const SamplePair &s, GraphType t) {
  switch (t) {
  case GraphType::FCG: return {s.fcg};
  case GraphType::PCG: return {s.pcg};
  case GraphType::Merged: return {merge_graphs(s.fcg, s.pcg)};
  case GraphType::Dual: return {s.fcg, s.pcg};
  }
  return {};
}

inline PreparedSample prepare_sample(const SamplePair &s, const ModelConfig &cfg) {
  PreparedSample out;
  out.label = s.label;
  for (const Graph &g : branch_graphs(s, cfg.graph_type))
    out.inputs.push_back({build_features(g, s.entropy, cfg.feature), Propagator(cfg.arch, g)});
  return out;
}

inline std::vector<PreparedSample> prepare_dataset(const Dataset &ds, const ModelConfig &cfg) {
  std::vector<PreparedSample> out;
  out.reserve(ds.samples.size());
  for (const auto &s : ds.samples) out.push_back(prepare_sample(s, cfg));
  return out;
}

// Holds parameters and the activations of the most recent forward pass.
// Not thread-safe; use one instance per worker. Inputs passed to forward()
// must stay alive until the matching backward().
class GeminiNet {
public:
  GeminiNet(ModelConfig cfg, ModelParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    validate(cfg_);
    if (static_cast<int>(params_.branches.size()) != cfg_.branch_count())
      throw ValidationError("parameter branch count does not match config");
  }

  const ModelConfig &config() const { return cfg_; }
  ModelParams &params() { return params_; }
  const ModelParams &params() const { return params_; }

  Eigen::Vector2d alpha() const { return softmax(params_.gate.value.col(0)); }

  /// Class probabilities [benign, malicious]. Dropout is active only when
  /// a generator is supplied.
  Vector2 forward(const PreparedSample &sample, std::mt19937_64 *dropout_rng = nullptr) {
    if (static_cast<int>(sample.inputs.size()) != cfg_.branch_count())
      throw ValidationError("sample prepared for a different graph type");
    has_forward_ = false;
    branches_.resize(sample.inputs.size());
    pooled_.resize(sample.inputs.size());
    for (std::size_t b = 0; b < sample.inputs.size(); ++b) {
      const BranchInput &in = sample.inputs[b];
      if (in.features.cols() != cfg_.input_width())
        throw ValidationError(detail::sprintf("feature width %ld does not match config width %ld",
                                              static_cast<long>(in.features.cols()),
                                              static_cast<long>(cfg_.input_width())));
      pooled_[b] = global_pool(branch_forward(params_.branches[b], in, branches_[b]));
    }

    if (cfg_.branch_count() == 2) {
      alpha_ = alpha();
      fused_ = alpha_(0) * pooled_[0] + alpha_(1) * pooled_[1];
    } else {
      fused_ = pooled_[0];
    }

    head_.resize(params_.head.size());
    RowVector h = fused_;
    for (std::size_t i = 0; i < params_.head.size(); ++i) {
      HeadCache &c = head_[i];
      c.input = h;
      c.pre = h * params_.head[i].w.value + RowVector(params_.head[i].b.value);
      if (i + 1 == params_.head.size()) {
        h = c.pre;
        break;
      }
      h = c.pre.cwiseMax(0.0);
      c.mask = RowVector::Ones(h.size());
      if (dropout_rng && cfg_.dropout > 0.0) {
        std::bernoulli_distribution keep(1.0 - cfg_.dropout);
        const double scale = 1.0 / (1.0 - cfg_.dropout);
        for (Eigen::Index j = 0; j < c.mask.size(); ++j) c.mask(j) = keep(*dropout_rng) ? scale : 0.0;
        h = h.cwiseProduct(c.mask);
      }
    }
    probs_ = softmax(h.transpose());
    has_forward_ = true;
    return probs_;
  }

  /// Accumulates d(loss)/d(param) into every parameter's grad buffer, given
  /// d(loss)/d(probabilities). Consumes the cached forward pass.
  void backward(const Vector2 &dprobs) {
    if (!has_forward_) throw StateError("backward() called without a preceding forward()");
    has_forward_ = false;

    const double dot = dprobs.dot(probs_);
    RowVector grad = (probs_.array() * (dprobs.array() - dot)).matrix().transpose();
    for (std::size_t k = params_.head.size(); k-- > 0;) {
      HeadCache &c = head_[k];
      DenseLayer &layer = params_.head[k];
      if (k + 1 != params_.head.size()) {
        grad = grad.cwiseProduct(c.mask);
        grad = (c.pre.array() > 0.0).select(grad, 0.0);
      }
      layer.w.grad.noalias() += c.input.transpose() * grad;
      layer.b.grad += grad;
      grad = grad * layer.w.value.transpose();
    }

    std::vector<RowVector> dpooled(branches_.size());
    if (cfg_.branch_count() == 2) {
      dpooled[0] = alpha_(0) * grad;
      dpooled[1] = alpha_(1) * grad;
      Eigen::Vector2d dalpha(grad.dot(pooled_[0]), grad.dot(pooled_[1]));
      const double s = alpha_.dot(dalpha);
      params_.gate.grad.col(0) += (alpha_.array() * (dalpha.array() - s)).matrix();
    } else {
      dpooled[0] = grad;
    }

    for (std::size_t b = 0; b < branches_.size(); ++b) {
      const auto n = branches_[b].node_count;
      Matrix dout = Matrix::Ones(n, 1) * (dpooled[b] / static_cast<double>(n));
      branch_backward(params_.branches[b], branches_[b], dout);
    }
  }

  void zero_grad() { gemini::zero_grad(params_); }

private:
  struct LayerCache {
    Matrix agg;  // aggregated input (SAGE: [h | mean(h)])
    Matrix pre1; // GIN inner pre-activation
    Matrix act1; // GIN inner activation
    Matrix pre;  // pre-activation of the layer output
  };
  struct BranchCache {
    const Propagator *prop = nullptr;
    Eigen::Index node_count = 0;
    std::vector<LayerCache> layers;
  };
  struct HeadCache {
    RowVector input;
    RowVector pre;
    RowVector mask;
  };

  Matrix branch_forward(const Branch &br, const BranchInput &in, BranchCache &cache) {
    const ArchKind arch = cfg_.arch;
    cache.prop = &in.prop;
    cache.node_count = in.features.rows();
    if (arch != ArchKind::MLP && in.prop.node_count != cache.node_count)
      throw ValidationError("feature rows do not match graph node count");

    if (arch == ArchKind::SGC) {
      cache.layers.resize(1);
      Matrix h = in.features;
      for (int k = 0; k < cfg_.layers; ++k) h = in.prop.apply(h);
      cache.layers[0].agg = std::move(h);
      cache.layers[0].pre = cache.layers[0].agg * br.layers[0].w.value;
      return cache.layers[0].pre;
    }

    cache.layers.resize(br.layers.size());
    Matrix h = in.features;
    for (std::size_t i = 0; i < br.layers.size(); ++i) {
      const ConvLayer &l = br.layers[i];
      LayerCache &c = cache.layers[i];
      const auto width = arch == ArchKind::SAGE ? 2 * h.cols() : h.cols();
      if (width != l.w.value.rows())
        throw ValidationError(detail::sprintf("layer %zu: input width does not match weight rows", i));
      switch (arch) {
      case ArchKind::GCN:
      case ArchKind::GIN: c.agg = in.prop.apply(h); break;
      case ArchKind::SAGE:
        c.agg.resize(h.rows(), 2 * h.cols());
        c.agg << h, in.prop.apply(h);
        break;
      case ArchKind::MLP: c.agg = std::move(h); break;
      case ArchKind::SGC: break;
      }
      if (arch == ArchKind::GIN) {
        c.pre1 = (c.agg * l.w.value).rowwise() + RowVector(l.b.value);
        c.act1 = relu(c.pre1);
        c.pre = (c.act1 * l.w2.value).rowwise() + RowVector(l.b2.value);
      } else {
        c.pre = c.agg * l.w.value;
      }
      h = relu(c.pre);
    }
    return h;
  }

  void branch_backward(Branch &br, BranchCache &cache, const Matrix &dout) {
    const ArchKind arch = cfg_.arch;
    if (arch == ArchKind::SGC) {
      br.layers[0].w.grad.noalias() += cache.layers[0].agg.transpose() * dout;
      return;
    }
    Matrix grad = dout;
    for (std::size_t i = br.layers.size(); i-- > 0;) {
      ConvLayer &l = br.layers[i];
      LayerCache &c = cache.layers[i];
      Matrix dpre = relu_backward(grad, c.pre);
      Matrix dagg;
      if (arch == ArchKind::GIN) {
        l.w2.grad.noalias() += c.act1.transpose() * dpre;
        l.b2.grad += dpre.colwise().sum();
        Matrix dpre1 = relu_backward(dpre * l.w2.value.transpose(), c.pre1);
        l.w.grad.noalias() += c.agg.transpose() * dpre1;
        l.b.grad += dpre1.colwise().sum();
        if (i == 0) break;
        dagg = dpre1 * l.w.value.transpose();
      } else {
        l.w.grad.noalias() += c.agg.transpose() * dpre;
        if (i == 0) break;
        dagg = dpre * l.w.value.transpose();
      }
      switch (arch) {
      case ArchKind::GCN:
      case ArchKind::GIN: grad = cache.prop->apply_transpose(dagg); break;
      case ArchKind::SAGE: {
        const auto w = dagg.cols() / 2;
        grad = dagg.leftCols(w) + cache.prop->apply_transpose(dagg.rightCols(w));
        break;
      }
      case ArchKind::MLP: grad = std::move(dagg); break;
      case ArchKind::SGC: break;
      }
    }
  }

  ModelConfig cfg_;
  ModelParams params_;

  std::vector<BranchCache> branches_;
  std::vector<RowVector> pooled_;
  Eigen::Vector2d alpha_ = Eigen::Vector2d::Constant(0.5);
  RowVector fused_;
  std::vector<HeadCache> head_;
  Eigen::Vector2d probs_ = Eigen::Vector2d::Constant(0.5);
  bool has_forward_ = false;
};

/// Stateless convenience: probabilities for one raw sample (evaluation mode).
inline Vector2 forward(const ModelParams &params, const ModelConfig &cfg, const SamplePair &sample) {
  GeminiNet net(cfg, params);
  return net.forward(prepare_sample(sample, cfg));
}

inline int predict(const Vector2 &probs) { return probs(1) > probs(0) ? 1 : 0; }

} // namespace gemini
