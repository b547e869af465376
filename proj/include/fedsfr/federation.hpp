#pragma once

#include <vector>

#include "fedsfr/channel.hpp"
#include "fedsfr/config.hpp"
#include "fedsfr/data.hpp"
#include "fedsfr/losses.hpp"
#include "fedsfr/metrics.hpp"
#include "fedsfr/privacy.hpp"

namespace fedsfr {

struct ClientState {
  int id = 0;
  Dataset data;
  std::vector<int> public_idx;  // indices into data, sorted
  Vector error_memory;          // flat, length D
  double p_k = 0.0;             // share of the global dataset
};

/// Participant split for one round: uplink strategy follows channel quality,
/// with the better-scored participants uploading model updates.
struct RoundPlan {
  std::vector<int> model_clients;    // sorted ascending
  std::vector<int> feature_clients;  // sorted ascending
};

RoundPlan sample_clients(int total, int model_count, int feature_count,
                         RngStream& rng);

struct LocalTrainResult {
  ModelParams w_local;
  Vector update;          // error memory plus eta times the summed batch gradients
  double last_loss = 0.0; // mean loss of the final local step
  double max_batch_grad_norm = 0.0;
};

/// Plain local SGD on the image loss; the global model is left untouched.
LocalTrainResult local_train(const ModelConfig& cfg, const Constellation& cons,
                             const ModelParams& w_global, const Dataset& data,
                             const Vector& error_memory, int steps, double eta,
                             int batch_size, double snr_db, double alpha_c,
                             RngStream& rng);

/// Encodes `count` public images sampled without replacement and runs each
/// feature batch through the uniform scalar quantizer.
std::vector<RowMatrix> extract_features(const ModelConfig& cfg, const ModelParams& p,
                                        const Dataset& data,
                                        const std::vector<int>& public_idx,
                                        int count, int bits, RngStream& rng);

/// Aggregation weights. fedavg splits by dataset size; the loss-aware schemes
/// weight the reported losses (softmax of min-max-normalized losses, or the
/// complementary-loss rule). All outputs are non-negative and sum to one.
Vector aggregation_weights(WeightScheme scheme, const std::vector<double>& sizes,
                           const std::vector<double>& losses);

/// w minus (total/uploaders) * sum of weighted dense updates.
ModelParams aggregate(const ModelConfig& cfg, const ModelParams& w,
                      const std::vector<Vector>& dense_updates,
                      const Vector& weights, int total, int uploaders);

/// SGD on the feature-reconstruction loss over the pooled feature batches.
/// Zero steps, a zero rate, or an empty pool return the input unchanged; the
/// batch size is clamped to the pool size.
ModelParams server_refine(const ModelConfig& cfg, const Constellation& cons,
                          const ModelParams& w_half,
                          const std::vector<RowMatrix>& pool, int steps, double eta,
                          int batch_size, double snr_db, double alpha_s,
                          RngStream& rng);

inline double decayed_rate(double base, double factor, int interval, int round) {
  return base * std::pow(factor, round / interval);
}

/// Drives the whole protocol from a config. All randomness is derived from
/// the config seed through named streams, so a run is a pure function of the
/// config; client work inside a round may be executed on several threads
/// without changing any result.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  /// Executes the configured number of rounds and returns the trace
  /// (including the pre-training evaluation record).
  MetricsTrace run(int threads = 1);

  /// Single-round stepping for tests and diagnostics.
  void init();
  void step(int threads = 1);

  const ExperimentConfig& config() const { return cfg_; }
  const ModelParams& model() const { return model_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const MetricsTrace& trace() const { return trace_; }
  const Constellation& constellation() const { return cons_; }
  const std::vector<Vector>& eval_images() const { return eval_images_; }

 private:
  struct ParticipantResult;

  MetricsRow evaluate(int eval_tag, double loss_mean, bool have_loss_mean);
  double eval_psnr(int eval_tag);
  double probe_grad_norm2();
  double probe_fr_loss(const ModelParams& p, const std::vector<RowMatrix>& pool,
                       int round);

  ExperimentConfig cfg_;
  LayerMap map_;
  Constellation cons_;
  ModelParams model_;
  std::vector<ClientState> clients_;
  std::vector<Vector> eval_images_;
  MetricsTrace trace_;
  int round_ = 0;
  double eps_cumulative_ = 0.0;
  bool initialized_ = false;
};

}  // namespace fedsfr
