#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gemini/config.hpp"
#include "gemini/error.hpp"
#include "gemini/metrics.hpp"
#include "gemini/model.hpp"

namespace gemini {

inline constexpr double kProbabilityFloor = 1e-12;

/// -log p[label], with p clamped to >= 1e-12.
inline double cross_entropy_loss(const Vector2 &probs, int label) {
  if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
  return -std::log(std::max(probs(label), kProbabilityFloor));
}

/// d(loss)/d(probs) matching cross_entropy_loss; zero where the clamp is active.
inline Vector2 cross_entropy_grad(const Vector2 &probs, int label) {
  if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
  Vector2 g = Vector2::Zero();
  if (probs(label) > kProbabilityFloor) g(label) = -1.0 / probs(label);
  return g;
}

// Adam with beta = (0.9, 0.999), eps = 1e-8 and bias correction.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

inline void adam_step(ModelParams &params, AdamState &state, double lr) {
  std::vector<Tensor2 *> tensors;
  for_each_param(params, [&](const std::string &, Tensor2 &t) { tensors.push_back(&t); });
  if (state.m.empty()) {
    for (Tensor2 *t : tensors) {
      state.m.push_back(Matrix::Zero(t->value.rows(), t->value.cols()));
      state.v.push_back(Matrix::Zero(t->value.rows(), t->value.cols()));
    }
  }
  if (state.m.size() != tensors.size()) throw ValidationError("adam state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor2 &t = *tensors[i];
    if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols())
      throw ValidationError("gradient shape does not match parameter shape");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * t.grad;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * t.grad.cwiseProduct(t.grad);
    t.value.array() -= lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + state.eps);
  }
}

/// Linear warm-up from max_lr/25 to max_lr over the first 30% of steps,
/// then cosine annealing down to max_lr/1e4 at the final step.
inline double one_cycle_lr(long step, long total_steps, double max_lr) {
  if (total_steps < 1 || step < 0 || step >= total_steps)
    throw ValidationError("one_cycle_lr: step out of range");
  const double start = max_lr / 25.0;
  const double floor = max_lr / 1e4;
  const long last = total_steps - 1;
  if (last == 0) return start;
  long peak = std::lround(0.3 * static_cast<double>(total_steps));
  peak = std::clamp(peak, 0L, last);
  if (step <= peak) {
    if (peak == 0) return max_lr;
    return start + (max_lr - start) * static_cast<double>(step) / static_cast<double>(peak);
  }
  const double t = static_cast<double>(step - peak) / static_cast<double>(last - peak);
  return floor + (max_lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

// Halves the rate after `patience` consecutive epochs without an
// improvement of more than `threshold` in validation F1.
struct PlateauState {
  double lr = 1e-3;
  double best = -1.0;
  int bad_epochs = 0;
  double factor = 0.5;
  int patience = 10;
  double threshold = 1e-4;
  double min_lr = 1e-6;
};

inline double reduce_on_plateau(double val_f1, PlateauState &s) {
  if (val_f1 > s.best + s.threshold) {
    s.best = val_f1;
    s.bad_epochs = 0;
  } else if (++s.bad_epochs >= s.patience) {
    s.lr = std::max(s.lr * s.factor, s.min_lr);
    s.bad_epochs = 0;
  }
  return s.lr;
}

inline double reduce_on_plateau(std::span<const double> history, PlateauState &s) {
  for (double f1 : history) reduce_on_plateau(f1, s);
  return s.lr;
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_f1 = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochRecord &, const EpochRecord &) = default;
};

struct TrainResult {
  ModelParams best_params;
  int best_epoch = 0;
  double best_val_f1 = -1.0;
  std::vector<EpochRecord> history;
};

inline std::vector<int> predict_all(GeminiNet &net, std::span<const PreparedSample> samples) {
  std::vector<int> preds;
  preds.reserve(samples.size());
  for (const auto &s : samples) preds.push_back(predict(net.forward(s)));
  return preds;
}

inline std::vector<int> label_ints(std::span<const PreparedSample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto &s : samples) out.push_back(to_int(s.label));
  return out;
}

inline double evaluate_f1(GeminiNet &net, std::span<const PreparedSample> samples) {
  const auto preds = predict_all(net, samples);
  const auto labels = label_ints(samples);
  return f1_score(preds, labels);
}

/// Trains one model. Samples are reshuffled every epoch, gradients are
/// averaged over `batch_size` samples per Adam step, and the returned
/// parameters come from the epoch with the highest validation F1 (earliest
/// on ties). Deterministic for a fixed train.seed.
inline TrainResult train_run(std::span<const PreparedSample> train, std::span<const PreparedSample> validation,
                             const ModelConfig &cfg) {
  validate(cfg);
  if (train.empty() || validation.empty()) throw ValidationError("train_run: empty split");
  const TrainConfig &tc = cfg.train;

  std::mt19937_64 shuffle_rng(mix_seed(tc.seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(tc.seed, 2));
  GeminiNet net(cfg, init_params(cfg, mix_seed(tc.seed, 0)));
  AdamState adam;

  const auto batch = static_cast<std::size_t>(tc.batch_size);
  const long steps_per_epoch = static_cast<long>((train.size() + batch - 1) / batch);
  const long total_steps = steps_per_epoch * tc.epochs;
  const double max_lr = tc.base_lr * tc.onecycle_peak_factor;
  PlateauState plateau{tc.base_lr, -1.0, 0, tc.plateau_factor, tc.plateau_patience, tc.plateau_threshold,
                       tc.plateau_min_lr};

  TrainResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    double lr = plateau.lr;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double scale = 1.0 / static_cast<double>(end - begin);
      net.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        const PreparedSample &s = train[order[i]];
        const Vector2 probs = net.forward(s, &dropout_rng);
        const int label = to_int(s.label);
        loss_sum += cross_entropy_loss(probs, label);
        net.backward(scale * cross_entropy_grad(probs, label));
      }
      lr = tc.scheduler == SchedulerKind::OneCycle ? one_cycle_lr(step, total_steps, max_lr) : plateau.lr;
      adam_step(net.params(), adam, lr);
      ++step;
    }

    const double val_f1 = evaluate_f1(net, validation);
    result.history.push_back({epoch, loss_sum / static_cast<double>(train.size()), val_f1, lr});
    if (val_f1 > result.best_val_f1) {
      result.best_val_f1 = val_f1;
      result.best_epoch = epoch;
      result.best_params = net.params();
    }
    if (tc.scheduler == SchedulerKind::Plateau) reduce_on_plateau(val_f1, plateau);
  }
  return result;
}

} // namespace gemini
