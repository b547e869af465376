#pragma once

#include <vector>

#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

enum class SymbolMapping { kGray, kNatural };

/// A fixed modulation alphabet with unit average power.
struct Constellation {
  int order = 0;
  RowMatrix points;  // order x 2, columns are (re, im)

  /// Square QAM for orders 4/16/64 (BPSK for order 2), normalized so the
  /// mean symbol power is exactly 1. Codeword index i maps to the i-th point
  /// in row-major order; per-axis levels are Gray-coded by default.
  static Constellation qam(int order, SymbolMapping mapping = SymbolMapping::kGray);

  double average_power() const {
    return points.rowwise().squaredNorm().mean();
  }
};

inline double noise_variance_from_snr_db(double snr_db, double power = 1.0) {
  return power / std::pow(10.0, snr_db / 10.0);
}

/// Nearest-codeword indices (0-based) under squared Euclidean distance.
/// Exact distance ties resolve to the lower index; `tie` reports whether any
/// row hit one.
std::vector<int> vq_quantize(const RowMatrix& codebook, const RowMatrix& features,
                             bool* tie = nullptr);

RowMatrix modulate(const Constellation& cons, const std::vector<int>& indices);

/// Adds circularly symmetric Gaussian noise with total per-symbol variance
/// sigma2 (sigma2/2 per real component). sigma2 == 0 returns the input and
/// consumes no draws.
RowMatrix awgn(const RowMatrix& symbols, double sigma2, RngStream& rng);

/// Minimum-distance detection; ties resolve to the lower index.
std::vector<int> detect(const Constellation& cons, const RowMatrix& received,
                        bool* tie = nullptr);

struct TransmitResult {
  RowMatrix received;          // rows are codebook rows picked by recv_idx
  std::vector<int> sent_idx;   // quantizer output
  std::vector<int> recv_idx;   // detector output
  bool tie = false;            // any exact quantize/detect tie along the way
};

/// Full digital hop: quantize, modulate, AWGN, detect, dequantize.
TransmitResult transmit(const RowMatrix& codebook, const Constellation& cons,
                        const RowMatrix& features, double snr_db, RngStream& rng);

}  // namespace fedsfr
