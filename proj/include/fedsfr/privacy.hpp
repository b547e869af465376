#pragma once

#include "fedsfr/compression.hpp"
#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

struct DpConfig {
  bool enabled = false;
  double sigma1 = 0.0;  // index-selection noise scale
  double sigma2 = 0.0;  // value noise scale
  double clip_q = 0.0;  // 1-norm clipping bound

  void validate() const {
    if (!enabled) return;
    if (sigma1 <= 0.0 || sigma2 <= 0.0)
      throw Error("dp config: noise scales must be positive when enabled");
    if (clip_q <= 0.0) throw Error("dp config: clip bound must be positive");
  }
};

/// i.i.d. Laplace(0, scale); scale == 0 yields exact zeros.
Vector laplace_noise(double scale, int n, RngStream& rng);

/// Rescales g so its 1-norm is at most q; vectors already inside the ball
/// pass through unchanged.
Vector clip_l1(const Vector& g, double q);

/// Noisy top-k index selection: the k largest |v_i + L_i| with
/// L_i ~ Laplace(0, sigma1). sigma1 == 0 degenerates to plain top-k.
std::vector<int> oneshot_select(const Vector& v, int k, double sigma1,
                                RngStream& rng);

/// Private uplink update: clip to the 1-norm ball, select indices per layer
/// with the noisy ranking, then perturb the kept values with Laplace(sigma2).
/// The stochastic quantizer is not stacked on top in this mode. With dp
/// disabled this reduces to the plain top-k of the clipped vector.
CompressedUpdate privatize_update(const Vector& g, const LayerMap& map,
                                  double fraction, const DpConfig& dp,
                                  RngStream& rng);

/// Same mechanism applied to the encoder prefix of the flat layout, treated
/// as a single block; everything computed from the result downstream is
/// post-processing.
CompressedUpdate privatize_encoder(const Vector& g_theta, double fraction,
                                   const DpConfig& dp, RngStream& rng);

enum class DpOption { kModelUpload, kFeatureUpload };

/// Closed-form per-round privacy budget. Feature upload halves the model
/// upload budget exactly because the mechanisms touch only the encoder half
/// of the parameters.
double epsilon_budget(DpOption option, int kept, double q, int dim, double sigma1,
                      double sigma2);

}  // namespace fedsfr
