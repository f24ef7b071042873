#pragma once

#include <span>

#include "pjfit/nn.hpp"

namespace pjfit::nn {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Coupled L2: g <- g + weight_decay * w before the moment update.
  double weight_decay = 0.0;
};

// One bias-corrected Adam update of every parameter from its current
// gradient. Gradients are left untouched; callers zero them.
// Throws NumericalError naming the parameter on a non-finite gradient.
void adam_step(std::span<Parameter* const> params, const AdamConfig& config);

}  // namespace pjfit::nn
