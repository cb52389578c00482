#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ngd/core/rng.hpp"
#include "ngd/nn/tensor.hpp"

namespace ngd::nn {

// Evaluates a scalar loss at the current parameter values. When
// `with_grad` is true it must also leave dLoss/dParam in every Param::grad
// (the harness zeroes them first).
using Objective = std::function<double(bool with_grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  std::size_t probes = 64;  // per parameter tensor; 0 = every coordinate
  double eps = 1e-5;
  // |a - n| / max(|a|, |n|, floor); below the floor the error is absolute.
  double floor = 1e-5;
};

// Compares analytic gradients against central differences
// (f(t+e) - f(t-e)) / 2e on randomly probed coordinates. Throws
// NonFiniteValue if the objective returns a non-finite value.
GradCheckResult grad_check(const Objective& objective,
                           const std::vector<Param*>& params, Rng& rng,
                           GradCheckOptions options = {});

}  // namespace ngd::nn
