#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "paydiff/nn/tensor.hpp"

namespace paydiff::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a ParameterSet. Frozen parameters are skipped.
template <class T>
class Adam {
 public:
  Adam(ParameterSet<T>& params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Throws Error naming
  /// the parameter if any gradient is non-finite (parameters are untouched).
  void step();
  std::int64_t steps() const { return t_; }
  AdamConfig& config() { return cfg_; }

  void save_state(std::ostream& out) const;
  void load_state(std::istream& in);

 private:
  ParameterSet<T>& params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace paydiff::nn
