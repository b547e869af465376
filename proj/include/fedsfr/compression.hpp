#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsfr/model.hpp"
#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

/// One sparsified layer of an uplink update. `values` are the real numbers
/// the receiver adds back in; when the layer went through the stochastic
/// quantizer they are redundant with (levels, scale, bits).
struct LayerUpdate {
  std::string name;
  std::vector<int> indices;  // strictly increasing offsets within the layer
  Vector values;
  double scale = 0.0;
  std::vector<std::int64_t> levels;  // signed magnitude levels; empty if unquantized
  int bits = 0;
};

struct CompressedUpdate {
  std::vector<LayerUpdate> layers;
  int total_kept = 0;

  /// Dense reconstruction: zeros everywhere off the kept index sets.
  Vector dense(const LayerMap& map) const;
};

/// Per-layer magnitude top-k: keeps ceil(fraction*len) entries per layer,
/// breaking magnitude ties toward the lower index. Returns global indices,
/// sorted.
std::vector<int> top_s_sparsify(const Vector& v, const LayerMap& map,
                                double fraction);

/// Indices of the `keep` largest-|.| entries of one block, sorted ascending.
std::vector<int> top_k_indices(const Vector& v, int keep);

struct QsgdResult {
  std::vector<std::int64_t> levels;  // sign(v_i) * magnitude level
  double scale = 0.0;                // 2-norm of the input
};

/// Unbiased stochastic quantizer onto 2^bits - 1 magnitude levels. bits must
/// be in [1, 52]. A zero vector yields scale 0 and exact reconstruction.
QsgdResult qsgd_quantize(const Vector& v, int bits, RngStream& rng);
Vector qsgd_dequantize(const QsgdResult& q, int bits);

/// Per-layer top-k followed by the stochastic quantizer on the kept values
/// (per-layer scaling). bits == 0 skips quantization and keeps raw values.
CompressedUpdate compress(const Vector& g, const LayerMap& map, double fraction,
                          int bits, RngStream& rng);

/// Error-memory recursion: the next memory is exactly what compression
/// dropped.
inline Vector update_error_memory(const Vector& g, const Vector& g_bar) {
  return g - g_bar;
}

struct ScalarQuantized {
  std::vector<std::int64_t> levels;
  double lo = 0.0;
  double hi = 0.0;
  int bits = 0;
  RowMatrix dequantized;
};

/// Batch-range uniform scalar quantizer with round-half-up. A degenerate
/// range (all entries equal) reproduces the input exactly.
ScalarQuantized uniform_scalar_quantize(const RowMatrix& y, int bits);

struct CompressorSpec {
  LayerMap map;
  double fraction = 1.0;
  int bits = 0;

  static CompressorSpec flat(int dim, double fraction, int bits);
};

/// Empirical contraction coefficient on standard Gaussian inputs:
/// 1 - mean of |x - reconstruct(compress(x))|^2 / |x|^2.
double estimate_contraction(const CompressorSpec& spec, int trials, RngStream& rng);

// Wire form, per layer: name length u16, name bytes, count u32, indices u32,
// scale f64, levels i8 — all little-endian. Only quantized updates with
// bits <= 7 are representable.
void write_update(std::ostream& os, const CompressedUpdate& u);
CompressedUpdate read_update(std::istream& is, int bits);

}  // namespace fedsfr
