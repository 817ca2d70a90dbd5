#include "paydiff/nn/serialize.hpp"

#include "paydiff/binary_io.hpp"

namespace paydiff::nn {

namespace {
constexpr std::uint32_t kDtypeF32 = 1;
}

template <class T>
void save_parameters(std::ostream& out, const ParameterSet<T>& params) {
  binio::put<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = params[i];
    binio::put_string(out, p.name);
    binio::put<std::uint32_t>(out, kDtypeF32);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (int d : p.value.shape) binio::put<std::int32_t>(out, d);
    std::vector<float> buf(p.value.data.begin(), p.value.data.end());
    binio::put_bytes(out, buf.data(), sizeof(float) * buf.size());
  }
}

template <class T>
void load_parameters(std::istream& in, ParameterSet<T>& params) {
  const auto n = binio::get<std::uint64_t>(in, "parameter count");
  if (n != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(n) + " parameters, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    const std::string name = binio::get_string(in, "parameter name", 4096);
    if (name != p.name) throw FormatError("checkpoint parameter '" + name + "' where '" + p.name + "' was expected");
    if (binio::get<std::uint32_t>(in, "dtype") != kDtypeF32) throw FormatError("unsupported dtype for " + name);
    const auto rank = binio::get<std::uint32_t>(in, "rank");
    if (rank > 8) throw FormatError("corrupt file: implausible rank for " + name);
    Shape s(rank);
    for (auto& d : s) d = binio::get<std::int32_t>(in, "shape");
    if (s != p.value.shape) {
      throw FormatError("parameter " + name + " has shape " + shape_str(s) + ", model expects " +
                        shape_str(p.value.shape));
    }
    std::vector<float> buf(p.value.size());
    binio::get_bytes(in, buf.data(), sizeof(float) * buf.size(), "parameter data");
    for (std::size_t k = 0; k < buf.size(); ++k) p.value[k] = static_cast<T>(buf[k]);
  }
}

template void save_parameters(std::ostream&, const ParameterSet<float>&);
template void save_parameters(std::ostream&, const ParameterSet<double>&);
template void load_parameters(std::istream&, ParameterSet<float>&);
template void load_parameters(std::istream&, ParameterSet<double>&);

}  // namespace paydiff::nn
