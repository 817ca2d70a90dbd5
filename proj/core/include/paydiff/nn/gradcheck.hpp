#pragma once

#include <cstdint>
#include <functional>

#include "paydiff/nn/graph.hpp"

namespace paydiff::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  int checked = 0;
  std::string worst;  // "param[index]"
};

/// Compares reverse-mode gradients of a scalar loss with central differences
/// on up to `per_param` random entries of every non-frozen parameter.
/// `loss` must build a fresh graph from the current parameter values.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport gradient_check(ParameterSet<double>& params, const std::function<Var(Graph<double>&)>& loss,
                               int per_param = 6, std::uint64_t seed = 0, double step = 1e-5,
                               double floor = 1e-6);

}  // namespace paydiff::nn
