#include "pjfit/optim.hpp"

#include <cmath>

#include "pjfit/errors.hpp"

namespace pjfit::nn {

void adam_step(std::span<Parameter* const> params, const AdamConfig& config) {
  for (Parameter* p : params) {
    if (!p->grad.all_finite()) {
      throw NumericalError("adam_step: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  for (Parameter* p : params) {
    ++p->step;
    const double t = static_cast<double>(p->step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    double* w = p->value.data();
    double* m = p->m.data();
    double* v = p->v.data();
    const double* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double gi = g[i] + config.weight_decay * w[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      w[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
    }
  }
}

}  // namespace pjfit::nn
