#include "fedsfr/analysis.hpp"

#include <cmath>

namespace fedsfr {

SurrogateDiag fr_surrogate_diag(const ModelConfig& cfg, const ModelParams& p,
                                const std::vector<Vector>& images,
                                double perturb_scale, int trials, RngStream& rng) {
  if (images.empty()) throw Error("fr_surrogate_diag: no probe images");
  if (trials <= 0) throw Error("fr_surrogate_diag: trials must be positive");
  SurrogateDiag out;
  if (perturb_scale == 0.0) {
    out.degenerate = true;
    return out;
  }

  std::vector<double> dx2(static_cast<std::size_t>(trials));
  std::vector<double> dy2(static_cast<std::size_t>(trials));
  double sum_dx = 0.0;
  double sum_dy = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector& x = images[static_cast<std::size_t>(t) % images.size()];
    const Vector offset = perturb_scale * rng.normal_vector(cfg.chw());
    const RowMatrix y = encode(cfg, p, x);
    const RowMatrix y_hat = encode(cfg, p, x + offset);
    dx2[static_cast<std::size_t>(t)] = offset.squaredNorm();
    dy2[static_cast<std::size_t>(t)] = (y - y_hat).squaredNorm();
    sum_dx += dx2[static_cast<std::size_t>(t)];
    sum_dy += dy2[static_cast<std::size_t>(t)];
  }
  if (sum_dx == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.mean_ratio = sum_dy / sum_dx;

  const double mx = sum_dx / trials;
  const double my = sum_dy / trials;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double ax = dx2[static_cast<std::size_t>(t)] - mx;
    const double ay = dy2[static_cast<std::size_t>(t)] - my;
    sxx += ax * ax;
    syy += ay * ay;
    sxy += ax * ay;
  }
  if (sxx == 0.0 || syy == 0.0) {
    out.degenerate = true;
    return out;
  }
  out.correlation = sxy / std::sqrt(sxx * syy);
  return out;
}

}  // namespace fedsfr
