#include "pjfit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pjfit/errors.hpp"

namespace pjfit::nn {

GradCheckReport grad_check(std::span<Parameter* const> params,
                           const std::function<double()>& loss,
                           const std::function<void()>& forward_backward, double tolerance,
                           double step, double floor) {
  if (parameter_count(params) > 10000) {
    throw ConfigError("grad_check: fragment exceeds 1e4 parameters");
  }
  zero_grads(params);
  forward_backward();

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter* p : params) {
    GradCheckEntry entry{p->name, 0.0};
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value[i] = original + step;
      const double up = loss();
      p->value[i] = original - step;
      const double down = loss();
      p->value[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
      double err = std::abs(analytic - numeric) / scale;
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      entry.max_rel_error = std::max(entry.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace pjfit::nn
