#include "fedsfr/compression.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace fedsfr {

Vector CompressedUpdate::dense(const LayerMap& map) const {
  Vector out = Vector::Zero(map.dim);
  for (const LayerUpdate& layer : layers) {
    const LayerSpan* span = nullptr;
    for (const LayerSpan& s : map.spans)
      if (s.name == layer.name) {
        span = &s;
        break;
      }
    if (span == nullptr) throw Error("dense: unknown layer " + layer.name);
    for (std::size_t i = 0; i < layer.indices.size(); ++i) {
      const int idx = layer.indices[i];
      if (idx < 0 || idx >= span->length)
        throw Error("dense: index out of range in layer " + layer.name);
      out[span->offset + idx] = layer.values[static_cast<Eigen::Index>(i)];
    }
  }
  return out;
}

std::vector<int> top_k_indices(const Vector& v, int keep) {
  const int n = static_cast<int>(v.size());
  keep = std::min(keep, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Magnitude descending, index ascending on ties.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(v[a]);
    const double mb = std::abs(v[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(keep));
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

int kept_count(int len, double fraction) {
  return static_cast<int>(std::ceil(fraction * len));
}

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error("sparsification fraction must be in (0, 1]");
}

}  // namespace

std::vector<int> top_s_sparsify(const Vector& v, const LayerMap& map,
                                double fraction) {
  check_fraction(fraction);
  if (v.size() != map.dim) throw Error("top_s_sparsify: vector/map size mismatch");
  std::vector<int> out;
  for (const LayerSpan& span : map.spans) {
    const Vector block = v.segment(span.offset, span.length);
    for (int idx : top_k_indices(block, kept_count(span.length, fraction)))
      out.push_back(span.offset + idx);
  }
  return out;
}

QsgdResult qsgd_quantize(const Vector& v, int bits, RngStream& rng) {
  if (bits < 1 || bits > 52) throw Error("qsgd: bits must be in [1, 52]");
  QsgdResult q;
  q.scale = v.norm();
  q.levels.assign(static_cast<std::size_t>(v.size()), 0);
  if (q.scale == 0.0) return q;
  const double s = std::pow(2.0, bits) - 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double r = std::abs(v[i]) / q.scale * s;
    double level = std::floor(r);
    const double frac = r - level;
    if (rng.uniform() < frac) level += 1.0;
    q.levels[static_cast<std::size_t>(i)] =
        static_cast<std::int64_t>(v[i] < 0.0 ? -level : level);
  }
  return q;
}

Vector qsgd_dequantize(const QsgdResult& q, int bits) {
  const double s = std::pow(2.0, bits) - 1.0;
  Vector v(static_cast<Eigen::Index>(q.levels.size()));
  for (std::size_t i = 0; i < q.levels.size(); ++i)
    v[static_cast<Eigen::Index>(i)] =
        q.scale * static_cast<double>(q.levels[i]) / s;
  return v;
}

CompressedUpdate compress(const Vector& g, const LayerMap& map, double fraction,
                          int bits, RngStream& rng) {
  check_fraction(fraction);
  if (g.size() != map.dim) throw Error("compress: vector/map size mismatch");
  CompressedUpdate u;
  for (const LayerSpan& span : map.spans) {
    const Vector block = g.segment(span.offset, span.length);
    LayerUpdate layer;
    layer.name = span.name;
    layer.indices = top_k_indices(block, kept_count(span.length, fraction));
    Vector kept(static_cast<Eigen::Index>(layer.indices.size()));
    for (std::size_t i = 0; i < layer.indices.size(); ++i)
      kept[static_cast<Eigen::Index>(i)] = block[layer.indices[i]];
    if (bits > 0) {
      QsgdResult q = qsgd_quantize(kept, bits, rng);
      layer.values = qsgd_dequantize(q, bits);
      layer.scale = q.scale;
      layer.levels = std::move(q.levels);
      layer.bits = bits;
    } else {
      layer.values = kept;
      layer.scale = kept.norm();
    }
    u.total_kept += static_cast<int>(layer.indices.size());
    u.layers.push_back(std::move(layer));
  }
  return u;
}

ScalarQuantized uniform_scalar_quantize(const RowMatrix& y, int bits) {
  if (bits < 1 || bits > 52) throw Error("scalar quantizer: bits must be in [1, 52]");
  ScalarQuantized out;
  out.bits = bits;
  out.lo = y.minCoeff();
  out.hi = y.maxCoeff();
  out.dequantized.resize(y.rows(), y.cols());
  out.levels.reserve(static_cast<std::size_t>(y.size()));
  if (out.hi == out.lo) {
    out.dequantized = y;
    out.levels.assign(static_cast<std::size_t>(y.size()), 0);
    return out;
  }
  const double steps = std::pow(2.0, bits) - 1.0;
  const double range = out.hi - out.lo;
  for (Eigen::Index r = 0; r < y.rows(); ++r)
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double q = std::floor((y(r, c) - out.lo) / range * steps + 0.5);
      out.levels.push_back(static_cast<std::int64_t>(q));
      out.dequantized(r, c) = out.lo + q / steps * range;
    }
  return out;
}

CompressorSpec CompressorSpec::flat(int dim, double fraction, int bits) {
  CompressorSpec spec;
  spec.map.spans.push_back({"flat", 0, dim});
  spec.map.dim = dim;
  spec.fraction = fraction;
  spec.bits = bits;
  return spec;
}

double estimate_contraction(const CompressorSpec& spec, int trials, RngStream& rng) {
  if (trials <= 0) throw Error("estimate_contraction: trials must be positive");
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector x = rng.normal_vector(spec.map.dim);
    const Vector xr = compress(x, spec.map, spec.fraction, spec.bits, rng)
                          .dense(spec.map);
    acc += (x - xr).squaredNorm() / x.squaredNorm();
  }
  return 1.0 - acc / trials;
}

namespace {

void write_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw Error("update stream: truncated");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw Error("update stream: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("update stream: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void write_update(std::ostream& os, const CompressedUpdate& u) {
  write_u32(os, static_cast<std::uint32_t>(u.layers.size()));
  for (const LayerUpdate& layer : u.layers) {
    if (layer.bits < 1 || layer.bits > 7)
      throw Error("write_update: layer " + layer.name +
                  " is not representable with i8 levels");
    write_u16(os, static_cast<std::uint16_t>(layer.name.size()));
    os.write(layer.name.data(), static_cast<std::streamsize>(layer.name.size()));
    write_u32(os, static_cast<std::uint32_t>(layer.indices.size()));
    for (int idx : layer.indices) write_u32(os, static_cast<std::uint32_t>(idx));
    write_f64(os, layer.scale);
    for (std::int64_t level : layer.levels) {
      const char b = static_cast<char>(static_cast<std::int8_t>(level));
      os.write(&b, 1);
    }
  }
}

CompressedUpdate read_update(std::istream& is, int bits) {
  if (bits < 1 || bits > 7) throw Error("read_update: bits must be in [1, 7]");
  CompressedUpdate u;
  const std::uint32_t n_layers = read_u32(is);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerUpdate layer;
    const std::uint16_t name_len = read_u16(is);
    layer.name.resize(name_len);
    is.read(layer.name.data(), name_len);
    if (!is) throw Error("update stream: truncated");
    const std::uint32_t count = read_u32(is);
    layer.indices.resize(count);
    for (std::uint32_t i = 0; i < count; ++i)
      layer.indices[i] = static_cast<int>(read_u32(is));
    layer.scale = read_f64(is);
    layer.levels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      char b;
      is.read(&b, 1);
      if (!is) throw Error("update stream: truncated");
      layer.levels[i] = static_cast<std::int8_t>(b);
    }
    layer.bits = bits;
    QsgdResult q{layer.levels, layer.scale};
    layer.values = qsgd_dequantize(q, bits);
    u.total_kept += static_cast<int>(count);
    u.layers.push_back(std::move(layer));
  }
  return u;
}

}  // namespace fedsfr
