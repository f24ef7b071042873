#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pjfit/nn.hpp"

namespace pjfit::nn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares analytic gradients against central finite differences.
//
// `loss` evaluates the scalar objective from the current parameter values.
// `forward_backward` runs the same objective and accumulates its gradient
// into Parameter::grad (grads are zeroed first).
//
// Relative error per element is |a - n| / max(|a|, |n|, floor); the floor
// keeps elements whose true gradient is ~0 from dividing round-off by zero.
GradCheckReport grad_check(std::span<Parameter* const> params,
                           const std::function<double()>& loss,
                           const std::function<void()>& forward_backward, double tolerance,
                           double step = 1e-5, double floor = 1e-6);

}  // namespace pjfit::nn
