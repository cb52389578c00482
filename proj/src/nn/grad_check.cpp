#include "ngd/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ngd/core/error.hpp"

namespace ngd::nn {
namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw NonFiniteValue("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Param*>& params, Rng& rng,
                           GradCheckOptions options) {
  zero_grads(params);
  checked(objective(true));
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords;
    if (options.probes == 0 || options.probes >= n) {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < options.probes; ++i)
        coords.push_back(uniform_index(rng, n));
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      p.value[i] = saved + options.eps;
      const double up = checked(objective(false));
      p.value[i] = saved - options.eps;
      const double down = checked(objective(false));
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[k][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.probes;
      if (rel > result.max_rel_error || result.probes == 1) {
        result.max_rel_error = rel;
        result.worst_param = k;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  // Leave the analytic gradient in place for callers that inspect it.
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = analytic[k];
  return result;
}

}  // namespace ngd::nn
