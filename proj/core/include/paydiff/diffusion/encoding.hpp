#pragma once

#include <string>
#include <vector>

#include "paydiff/common.hpp"

namespace paydiff {

enum class PayloadScheme { numeric, one_hot, less_than, supported_range };
/// How a supported_range model reads a single target payload at inference.
enum class RangeMode { as_one_hot, as_less_than };
enum class EncodingPhase { train, infer };

/// Indices 0..18 of the binary encodings.
inline constexpr int kPayloadBins = 19;

struct PayloadEncoding {
  PayloadScheme scheme = PayloadScheme::one_hot;
  RangeMode range_mode = RangeMode::as_less_than;

  int dim() const { return scheme == PayloadScheme::numeric ? 1 : kPayloadBins; }
};

std::string to_string(PayloadScheme s);
std::string to_string(RangeMode m);
PayloadScheme parse_payload_scheme(const std::string& s);
RangeMode parse_range_mode(const std::string& s);

/// ceil(p) for p in [0, 18]; DomainError otherwise.
int payload_index(double p);

/// numeric: 2 p / 18 - 1. one_hot: 1 at ceil(p). less_than: ones at 0..ceil(p).
/// supported_range: less_than of the label when training; one_hot or
/// less_than of ceil(p) at inference, per range_mode.
std::vector<double> encode_payload(const PayloadEncoding& enc, double value, EncodingPhase phase);

/// Network input: binary entries mapped to {-1, +1}; numeric unchanged.
std::vector<double> network_input(const PayloadEncoding& enc, const std::vector<double>& encoded);

/// p ~ U(0, m) for training; supported_range uses m itself and draws nothing.
double sample_training_payload(const PayloadEncoding& enc, double m, Rng& rng);

}  // namespace paydiff
