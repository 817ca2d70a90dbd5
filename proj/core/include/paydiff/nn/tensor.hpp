#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "paydiff/common.hpp"

namespace paydiff::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Storage is aligned to the widest SIMD packet so that vectorized
/// reductions sum in the same order wherever the buffer lands.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense row-major array. T is float for training, double for gradient checks.
template <class T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  T operator[](std::size_t i) const { return data[i]; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  bool all_finite() const;
};

/// Named trainable array with its gradient accumulator.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// Owns parameters in registration order; addresses stay stable.
template <class T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value);
  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }
  Parameter<T>* find(const std::string& name);
  std::size_t total_elements() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

}  // namespace paydiff::nn
