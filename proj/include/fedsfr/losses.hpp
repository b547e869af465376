#pragma once

#include "fedsfr/channel.hpp"
#include "fedsfr/model.hpp"

namespace fedsfr {

struct LossBreakdown {
  double total = 0.0;
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double alpha = 0.0;
  double beta = 0.0;  // always 0.25 * alpha
};

/// Image-reconstruction objective around one simulated digital hop:
///   term1: MSE(decoded image, image), with the straight-through bridge
///          across the quantizer so the encoder/decoder both learn;
///   term2: MSE(received codewords, sg(features)) — moves only the codebook;
///   term3: MSE(features, sg(received codewords)) — regularizes the encoder
///          toward the codebook without moving it.
/// total = term1 + alpha*term2 + 0.25*alpha*term3.
class ImageLossGraph {
 public:
  ImageLossGraph(const ModelConfig& cfg, const Constellation* cons, double snr_db,
                 double alpha);

  LossBreakdown eval(const ModelParams& p, const Vector& image, RngStream& rng);
  std::pair<LossBreakdown, Vector> eval_grad(const ModelParams& p,
                                             const Vector& image, RngStream& rng);

  Graph& graph() { return g_; }
  const ModelGraphInputs& inputs() const { return in_; }
  Graph::NodeId image_node() const { return image_; }
  Graph::NodeId total_node() const { return total_; }
  Graph::NodeId term_node(int k) const;  // k in {1,2,3}
  const ModelConfig& config() const { return cfg_; }
  double alpha() const { return alpha_; }
  double beta() const { return 0.25 * alpha_; }
  LossBreakdown breakdown() const;
  Vector flat_grad() const { return in_.flat_grad(g_, cfg_); }

 private:
  ModelConfig cfg_;
  double alpha_;
  Graph g_;
  ModelGraphInputs in_;
  Graph::NodeId image_ = -1;
  Graph::NodeId features_ = -1;
  Graph::NodeId received_ = -1;
  Graph::NodeId t1_ = -1, t2_ = -1, t3_ = -1;
  Graph::NodeId total_ = -1;
};

/// Feature-reconstruction objective over two independent hops at the same
/// SNR. The reference batch crosses the first hop, is decoded and re-encoded,
/// and the terms mirror the image loss with the re-encoded batch in the
/// image's role:
///   term1: MSE(re-encoded batch, reference batch);
///   term2: MSE(second-hop codewords, sg(re-encoded batch)) — codebook only;
///   term3: MSE(re-encoded batch, sg(second-hop codewords)).
class FeatureLossGraph {
 public:
  FeatureLossGraph(const ModelConfig& cfg, const Constellation* cons, double snr_db,
                   double alpha);

  LossBreakdown eval(const ModelParams& p, const RowMatrix& y1, RngStream& rng);
  std::pair<LossBreakdown, Vector> eval_grad(const ModelParams& p,
                                             const RowMatrix& y1, RngStream& rng);

  Graph& graph() { return g_; }
  const ModelGraphInputs& inputs() const { return in_; }
  Graph::NodeId y1_node() const { return y1_; }
  Graph::NodeId total_node() const { return total_; }
  Graph::NodeId term_node(int k) const;
  const ModelConfig& config() const { return cfg_; }
  LossBreakdown breakdown() const;
  Vector flat_grad() const { return in_.flat_grad(g_, cfg_); }

 private:
  ModelConfig cfg_;
  double alpha_;
  Graph g_;
  ModelGraphInputs in_;
  Graph::NodeId y1_ = -1;
  Graph::NodeId y2_ = -1;
  Graph::NodeId t1_ = -1, t2_ = -1, t3_ = -1;
  Graph::NodeId total_ = -1;
};

/// One-shot evaluations; for repeated calls prefer the graph classes, which
/// reuse the tape.
std::pair<LossBreakdown, Vector> image_loss(const ModelConfig& cfg,
                                            const ModelParams& p, const Vector& image,
                                            const Constellation& cons, double snr_db,
                                            double alpha, RngStream& rng);
std::pair<LossBreakdown, Vector> feature_loss(const ModelConfig& cfg,
                                              const ModelParams& p,
                                              const RowMatrix& y1,
                                              const Constellation& cons,
                                              double snr_db, double alpha,
                                              RngStream& rng);

/// 10*log10(peak^2 / MSE), capped at 99 dB when the images agree exactly.
double psnr(const Vector& x, const Vector& x_hat, double peak);

}  // namespace fedsfr
