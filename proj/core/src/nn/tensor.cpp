#include "paydiff/nn/tensor.hpp"

#include <cmath>

namespace paydiff::nn {

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

template <class T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(values.begin(), values.end()) {
  if (data.size() != numel(shape)) {
    throw DimensionError("tensor data has " + std::to_string(data.size()) + " elements, shape " + shape_str(shape) +
                         " needs " + std::to_string(numel(shape)));
  }
}

template <class T>
bool Tensor<T>::all_finite() const {
  for (T v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <class T>
Parameter<T>& ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) throw DomainError("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(value)));
  return *params_.back();
}

template <class T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <class T>
std::size_t ParameterSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

template <class T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

template struct Tensor<float>;
template struct Tensor<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace paydiff::nn
