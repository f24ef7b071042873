#pragma once

#include <cmath>
#include <string>

#include "pjfit/nn.hpp"
#include "pjfit/rng.hpp"

namespace testing {

inline pjfit::nn::Parameter random_param(const std::string& name, pjfit::Shape shape,
                                         pjfit::Rng& rng, double scale = 1.0) {
  pjfit::nn::Parameter p(name, std::move(shape));
  for (double& v : p.value.values()) v = rng.uniform(-scale, scale);
  return p;
}

// Fixed random weights turning a tensor into a scalar loss with O(1)
// gradients everywhere.
inline pjfit::Tensor random_like(const pjfit::Tensor& t, pjfit::Rng& rng) {
  pjfit::Tensor r(t.shape());
  for (double& v : r.values()) v = rng.uniform(-1.0, 1.0);
  return r;
}

inline double project(const pjfit::Tensor& y, const pjfit::Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

}  // namespace testing
