#pragma once

#include <iosfwd>

#include "paydiff/nn/tensor.hpp"

namespace paydiff::nn {

/// Writes every parameter as (name, shape, float32 data).
template <class T>
void save_parameters(std::ostream& out, const ParameterSet<T>& params);

/// Reads blobs written by save_parameters into an identically built set.
/// Names, count and shapes must match exactly; otherwise FormatError.
template <class T>
void load_parameters(std::istream& in, ParameterSet<T>& params);

}  // namespace paydiff::nn
