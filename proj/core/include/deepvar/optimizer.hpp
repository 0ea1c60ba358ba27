#pragma once

#include <string>
#include <vector>

#include "deepvar/tape.hpp"

namespace deepvar {

enum class OptimizerKind { kSgd, kRmsProp, kAdam };

std::string optimizer_kind_name(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  double decay = 1e-5;  // effective lr = lr / (1 + decay * step_index)
  double momentum = 0.9;
  bool nesterov = true;  // SGD only
  double rms_decay = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Scales every gradient by threshold / norm when the joint L2 norm exceeds
// the threshold; returns the pre-clip norm.
double clip_global_norm(const std::vector<Tensor*>& gradients, double threshold);
double clip_global_norm(const std::vector<Parameter*>& params, double threshold);

// In-place parameter updates. step_index counts completed updates (0 for the
// first call); it drives both the decay schedule and Adam bias correction.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Parameter*> params);

  // Throws NumericError naming the parameter if any gradient is not finite.
  void step(std::size_t step_index);

  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> slot1_;  // SGD velocity / RMS accumulator / Adam m
  std::vector<Tensor> slot2_;  // Adam v
};

}  // namespace deepvar
