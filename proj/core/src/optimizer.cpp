#include "deepvar/optimizer.hpp"

#include <cmath>

#include "deepvar/errors.hpp"

namespace deepvar {

std::string optimizer_kind_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kRmsProp: return "rmsp";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  check_config(learning_rate > 0.0, "optimizer: learning_rate must be > 0");
  check_config(decay >= 0.0, "optimizer: decay must be >= 0");
  check_config(momentum >= 0.0 && momentum < 1.0, "optimizer: momentum must be in [0, 1)");
  check_config(rms_decay > 0.0 && rms_decay < 1.0, "optimizer: rms_decay must be in (0, 1)");
  check_config(beta1 > 0.0 && beta1 < 1.0, "optimizer: beta1 must be in (0, 1)");
  check_config(beta2 > 0.0 && beta2 < 1.0, "optimizer: beta2 must be in (0, 1)");
  check_config(epsilon > 0.0, "optimizer: epsilon must be > 0");
}

double clip_global_norm(const std::vector<Tensor*>& gradients, double threshold) {
  check_numeric(threshold > 0.0, "clip_global_norm: threshold must be > 0");
  double sq = 0.0;
  for (const Tensor* g : gradients) {
    for (std::size_t i = 0; i < g->size(); ++i) sq += (*g)[i] * (*g)[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (Tensor* g : gradients) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= scale;
    }
  }
  return norm;
}

double clip_global_norm(const std::vector<Parameter*>& params, double threshold) {
  std::vector<Tensor*> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    if (p->trainable) grads.push_back(&p->grad);
  }
  return clip_global_norm(grads, threshold);
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  for (const Parameter* p : params_) {
    slot1_.push_back(Tensor::zeros_like(p->value));
    if (config_.kind == OptimizerKind::kAdam) {
      slot2_.push_back(Tensor::zeros_like(p->value));
    }
  }
}

void Optimizer::step(std::size_t step_index) {
  const double lr = config_.learning_rate /
                    (1.0 + config_.decay * static_cast<double>(step_index));
  const double t1 = static_cast<double>(step_index) + 1.0;  // Adam bias correction

  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter& p = *params_[pi];
    if (!p.trainable) continue;
    check_numeric(p.grad.all_finite(),
                  "non-finite gradient in parameter " + p.name + " at step " +
                      std::to_string(step_index));

    Tensor& w = p.value;
    const Tensor& g = p.grad;
    switch (config_.kind) {
      case OptimizerKind::kSgd: {
        Tensor& v = slot1_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = config_.momentum * v[i] - lr * g[i];
          if (config_.nesterov) {
            w[i] += config_.momentum * v[i] - lr * g[i];
          } else {
            w[i] += v[i];
          }
        }
        break;
      }
      case OptimizerKind::kRmsProp: {
        Tensor& a = slot1_[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
          a[i] = config_.rms_decay * a[i] + (1.0 - config_.rms_decay) * g[i] * g[i];
          w[i] -= lr * g[i] / (std::sqrt(a[i]) + config_.epsilon);
        }
        break;
      }
      case OptimizerKind::kAdam: {
        Tensor& m = slot1_[pi];
        Tensor& v = slot2_[pi];
        const double c1 = 1.0 - std::pow(config_.beta1, t1);
        const double c2 = 1.0 - std::pow(config_.beta2, t1);
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
          const double m_hat = m[i] / c1;
          const double v_hat = v[i] / c2;
          w[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
        break;
      }
    }
  }
}

}  // namespace deepvar
