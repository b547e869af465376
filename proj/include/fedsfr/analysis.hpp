#pragma once

#include <utility>
#include <vector>

#include "fedsfr/model.hpp"
#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

/// Alignment ratio |a-b|^2 / (|a|^2 + |b|^2), always in [0, 2]. Small values
/// mean the second vector points where the first does.
inline double assumption1_ratio(const Vector& a, const Vector& b) {
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 && nb == 0.0)
    throw Error("assumption1_ratio: both vectors are zero");
  return (a - b).squaredNorm() / (na + nb);
}

/// Closed-form ceiling for the steady-state error-memory energy of a
/// contraction-nu compressor: 4(1-nu)/nu^2 * (eta0 * E_c * G)^2.
inline double error_memory_bound(double nu, double eta0, int local_steps,
                                 double grad_bound) {
  if (!(nu > 0.0 && nu <= 1.0)) throw Error("error_memory_bound: nu must be in (0, 1]");
  const double step = eta0 * local_steps * grad_bound;
  return 4.0 * (1.0 - nu) / (nu * nu) * step * step;
}

struct SurrogateDiag {
  double mean_ratio = 0.0;   // sum |dY|^2 / sum |dX|^2
  double correlation = 0.0;  // Pearson between per-trial |dX|^2 and |dY|^2
  bool degenerate = false;
};

/// Probes how faithfully feature-space discrepancy tracks image-space
/// discrepancy for the current encoder: images are perturbed by Gaussian
/// offsets of the given scale and both squared errors are paired up.
SurrogateDiag fr_surrogate_diag(const ModelConfig& cfg, const ModelParams& p,
                                const std::vector<Vector>& images,
                                double perturb_scale, int trials, RngStream& rng);

/// Fraction of rounds whose refinement strictly lowered the tracked loss.
inline double improvement_ratio(const std::vector<std::pair<double, double>>& before_after) {
  if (before_after.empty()) return 0.0;
  int improved = 0;
  for (const auto& [before, after] : before_after)
    if (after < before) ++improved;
  return static_cast<double>(improved) / static_cast<double>(before_after.size());
}

/// Decayed learning rates satisfying the server-below-client ordering for
/// every horizon larger than one round.
inline double client_rate_schedule(double alpha_t, int horizon) {
  return alpha_t / std::sqrt(static_cast<double>(horizon));
}
inline double server_rate_schedule(double alpha_t, int horizon) {
  return alpha_t / std::pow(static_cast<double>(horizon), 0.75);
}

}  // namespace fedsfr
