#include "paydiff/nn/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "paydiff/binary_io.hpp"

namespace paydiff::nn {

template <class T>
Adam<T>::Adam(ParameterSet<T>& params, AdamConfig config) : params_(params), cfg_(config) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_.emplace_back(params_[i].value.size(), T(0));
    v_.emplace_back(params_[i].value.size(), T(0));
  }
}

template <class T>
void Adam<T>::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter<T>& p = params_[i];
    if (!p.frozen && !p.grad.all_finite()) throw Error("adam: non-finite gradient in parameter '" + p.name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(cfg_.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter<T>& p = params_[i];
    if (p.frozen) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T gk = p.grad[k];
      m[k] = b1 * m[k] + (T(1) - b1) * gk;
      v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
      p.value[k] -= step * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
}

template <class T>
void Adam<T>::save_state(std::ostream& out) const {
  binio::put<std::int64_t>(out, t_);
  binio::put<std::uint64_t>(out, m_.size());
  for (std::size_t i = 0; i < m_.size(); ++i) {
    binio::put<std::uint64_t>(out, m_[i].size());
    binio::put_bytes(out, m_[i].data(), sizeof(T) * m_[i].size());
    binio::put_bytes(out, v_[i].data(), sizeof(T) * v_[i].size());
  }
}

template <class T>
void Adam<T>::load_state(std::istream& in) {
  const auto t = binio::get<std::int64_t>(in, "optimizer step");
  const auto n = binio::get<std::uint64_t>(in, "optimizer slots");
  if (n != m_.size()) throw FormatError("optimizer state has " + std::to_string(n) + " slots, expected " +
                                        std::to_string(m_.size()));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const auto len = binio::get<std::uint64_t>(in, "optimizer slot size");
    if (len != m_[i].size()) throw FormatError("optimizer slot " + std::to_string(i) + " has the wrong size");
    binio::get_bytes(in, m_[i].data(), sizeof(T) * m_[i].size(), "optimizer moments");
    binio::get_bytes(in, v_[i].data(), sizeof(T) * v_[i].size(), "optimizer moments");
  }
  t_ = t;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace paydiff::nn
