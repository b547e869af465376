#include "fedsfr/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsfr {

Vector laplace_noise(double scale, int n, RngStream& rng) {
  if (scale < 0.0) throw Error("laplace_noise: negative scale");
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.laplace(scale);
  return v;
}

Vector clip_l1(const Vector& g, double q) {
  if (q <= 0.0) throw Error("clip_l1: bound must be positive");
  const double norm = g.lpNorm<1>();
  if (norm <= q) return g;
  return g * (q / norm);
}

std::vector<int> oneshot_select(const Vector& v, int k, double sigma1,
                                RngStream& rng) {
  if (k < 0) throw Error("oneshot_select: negative count");
  const int n = static_cast<int>(v.size());
  k = std::min(k, n);
  const Vector noisy = v + laplace_noise(sigma1, n, rng);
  return top_k_indices(noisy, k);
}

namespace {

int kept_count(int len, double fraction) {
  return static_cast<int>(std::ceil(fraction * len));
}

LayerUpdate privatize_block(const Vector& block, const std::string& name,
                            double fraction, const DpConfig& dp, RngStream& rng) {
  LayerUpdate layer;
  layer.name = name;
  const int keep = kept_count(static_cast<int>(block.size()), fraction);
  const double s1 = dp.enabled ? dp.sigma1 : 0.0;
  const double s2 = dp.enabled ? dp.sigma2 : 0.0;
  layer.indices = oneshot_select(block, keep, s1, rng);
  layer.values.resize(keep);
  const Vector noise = laplace_noise(s2, keep, rng);
  for (int i = 0; i < keep; ++i)
    layer.values[i] = block[layer.indices[static_cast<std::size_t>(i)]] + noise[i];
  layer.scale = layer.values.norm();
  return layer;
}

}  // namespace

CompressedUpdate privatize_update(const Vector& g, const LayerMap& map,
                                  double fraction, const DpConfig& dp,
                                  RngStream& rng) {
  if (g.size() != map.dim) throw Error("privatize_update: vector/map size mismatch");
  dp.validate();
  const Vector clipped = dp.clip_q > 0.0 ? clip_l1(g, dp.clip_q) : g;
  CompressedUpdate u;
  for (const LayerSpan& span : map.spans) {
    const Vector block = clipped.segment(span.offset, span.length);
    LayerUpdate layer = privatize_block(block, span.name, fraction, dp, rng);
    u.total_kept += static_cast<int>(layer.indices.size());
    u.layers.push_back(std::move(layer));
  }
  return u;
}

CompressedUpdate privatize_encoder(const Vector& g_theta, double fraction,
                                   const DpConfig& dp, RngStream& rng) {
  dp.validate();
  const Vector clipped = dp.clip_q > 0.0 ? clip_l1(g_theta, dp.clip_q) : g_theta;
  CompressedUpdate u;
  LayerUpdate layer = privatize_block(clipped, "theta", fraction, dp, rng);
  u.total_kept = static_cast<int>(layer.indices.size());
  u.layers.push_back(std::move(layer));
  return u;
}

double epsilon_budget(DpOption option, int kept, double q, int dim, double sigma1,
                      double sigma2) {
  if (kept <= 0 || q <= 0.0 || dim <= 0 || sigma1 <= 0.0 || sigma2 <= 0.0)
    throw Error("epsilon_budget: all inputs must be positive");
  // Index selection at sensitivity 2Q (resp. Q on the encoder half) plus a
  // value perturbation at sensitivity 2SQ/D (resp. SQ/D); the halved
  // sensitivities make the feature option exactly half the model option.
  const double base = kept * q * (sigma1 + 2.0 * sigma2) / (dim * sigma1 * sigma2);
  return option == DpOption::kModelUpload ? 2.0 * base : base;
}

}  // namespace fedsfr
