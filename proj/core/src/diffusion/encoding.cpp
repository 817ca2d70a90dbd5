#include "paydiff/diffusion/encoding.hpp"

#include <cmath>

#include "paydiff/dynamics.hpp"

namespace paydiff {

std::string to_string(PayloadScheme s) {
  switch (s) {
    case PayloadScheme::numeric:
      return "numeric";
    case PayloadScheme::one_hot:
      return "one_hot";
    case PayloadScheme::less_than:
      return "less_than";
    case PayloadScheme::supported_range:
      return "supported_range";
  }
  return "unknown";
}

std::string to_string(RangeMode m) { return m == RangeMode::as_one_hot ? "as_one_hot" : "as_less_than"; }

PayloadScheme parse_payload_scheme(const std::string& s) {
  for (auto v : {PayloadScheme::numeric, PayloadScheme::one_hot, PayloadScheme::less_than,
                 PayloadScheme::supported_range}) {
    if (to_string(v) == s) return v;
  }
  throw DomainError("unknown payload encoding '" + s + "' (numeric, one_hot, less_than, supported_range)");
}

RangeMode parse_range_mode(const std::string& s) {
  if (s == "as_one_hot") return RangeMode::as_one_hot;
  if (s == "as_less_than") return RangeMode::as_less_than;
  throw DomainError("unknown range mode '" + s + "' (as_one_hot, as_less_than)");
}

int payload_index(double p) {
  if (!(p >= 0.0 && p <= kPayloadCap)) {
    throw DomainError("payload " + std::to_string(p) + " kg outside [0, " + std::to_string(kPayloadCap) + "]");
  }
  return static_cast<int>(std::ceil(p));
}

namespace {

std::vector<double> one_hot(int idx) {
  std::vector<double> e(kPayloadBins, 0.0);
  e[static_cast<std::size_t>(idx)] = 1.0;
  return e;
}

std::vector<double> less_than(int idx) {
  std::vector<double> e(kPayloadBins, 0.0);
  for (int j = 0; j <= idx; ++j) e[static_cast<std::size_t>(j)] = 1.0;
  return e;
}

}  // namespace

std::vector<double> encode_payload(const PayloadEncoding& enc, double value, EncodingPhase phase) {
  const int idx = payload_index(value);
  switch (enc.scheme) {
    case PayloadScheme::numeric:
      return {2.0 * value / kPayloadCap - 1.0};
    case PayloadScheme::one_hot:
      return one_hot(idx);
    case PayloadScheme::less_than:
      return less_than(idx);
    case PayloadScheme::supported_range:
      if (phase == EncodingPhase::train || enc.range_mode == RangeMode::as_less_than) return less_than(idx);
      return one_hot(idx);
  }
  throw DomainError("invalid payload scheme");
}

std::vector<double> network_input(const PayloadEncoding& enc, const std::vector<double>& encoded) {
  require_dim(static_cast<Eigen::Index>(encoded.size()), enc.dim(), "payload encoding");
  if (enc.scheme == PayloadScheme::numeric) return encoded;
  std::vector<double> out(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) out[i] = 2.0 * encoded[i] - 1.0;
  return out;
}

double sample_training_payload(const PayloadEncoding& enc, double m, Rng& rng) {
  payload_index(m);
  if (enc.scheme == PayloadScheme::supported_range) return m;
  if (m == 0.0) return 0.0;
  return std::uniform_real_distribution<double>(0.0, m)(rng);
}

}  // namespace paydiff
