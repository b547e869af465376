#include "fedsfr/losses.hpp"

#include <cmath>

namespace fedsfr {

namespace {

Graph::NodeId combine_terms(Graph& g, Graph::NodeId t1, Graph::NodeId t2,
                            Graph::NodeId t3, double alpha) {
  return g.add(t1, g.add(g.scale(t2, alpha), g.scale(t3, 0.25 * alpha)));
}

LossBreakdown read_breakdown(const Graph& g, Graph::NodeId t1, Graph::NodeId t2,
                             Graph::NodeId t3, Graph::NodeId total, double alpha) {
  LossBreakdown b;
  b.term1 = g.value(t1).data[0];
  b.term2 = g.value(t2).data[0];
  b.term3 = g.value(t3).data[0];
  b.total = g.value(total).data[0];
  b.alpha = alpha;
  b.beta = 0.25 * alpha;
  return b;
}

}  // namespace

ImageLossGraph::ImageLossGraph(const ModelConfig& cfg, const Constellation* cons,
                               double snr_db, double alpha)
    : cfg_(cfg), alpha_(alpha) {
  cfg.validate();
  image_ = g_.input({cfg.chw()}, "image");
  features_ = build_encoder(g_, cfg, in_, image_);
  const Graph::NodeId cb = add_codebook_input(g_, cfg, in_);
  received_ = g_.vq_transmit(cb, features_, cons, snr_db, cfg.n_vectors,
                             cfg.feature_dim);
  const Graph::NodeId bridged = g_.straight_through(received_, features_);
  const Graph::NodeId decoded = build_decoder(g_, cfg, in_, bridged);
  t1_ = g_.mse(decoded, image_);
  t2_ = g_.mse(received_, g_.stop_gradient(features_));
  t3_ = g_.mse(features_, g_.stop_gradient(received_));
  total_ = combine_terms(g_, t1_, t2_, t3_, alpha_);
}

Graph::NodeId ImageLossGraph::term_node(int k) const {
  switch (k) {
    case 1: return t1_;
    case 2: return t2_;
    case 3: return t3_;
  }
  throw Error("term_node: k must be 1, 2, or 3");
}

LossBreakdown ImageLossGraph::breakdown() const {
  return read_breakdown(g_, t1_, t2_, t3_, total_, alpha_);
}

LossBreakdown ImageLossGraph::eval(const ModelParams& p, const Vector& image,
                                   RngStream& rng) {
  in_.bind(g_, p);
  g_.bind(image_, Tensor::from_vector(image));
  g_.forward(&rng);
  return breakdown();
}

std::pair<LossBreakdown, Vector> ImageLossGraph::eval_grad(const ModelParams& p,
                                                           const Vector& image,
                                                           RngStream& rng) {
  const LossBreakdown b = eval(p, image, rng);
  g_.backward(total_);
  return {b, flat_grad()};
}

FeatureLossGraph::FeatureLossGraph(const ModelConfig& cfg, const Constellation* cons,
                                   double snr_db, double alpha)
    : cfg_(cfg), alpha_(alpha) {
  cfg.validate();
  y1_ = g_.input({cfg.n_vectors, cfg.feature_dim}, "y1");
  const Graph::NodeId cb = add_codebook_input(g_, cfg, in_);
  const Graph::NodeId hop1 =
      g_.vq_transmit(cb, y1_, cons, snr_db, cfg.n_vectors, cfg.feature_dim);
  // Straight-through across the first hop: the decoder consumes the received
  // codewords while the backward pass detaches them, so the codebook is never
  // moved by this hop. (The reference batch is plain data, so routing its
  // gradient there is inert.)
  const Graph::NodeId bridged = g_.straight_through(hop1, y1_);
  const Graph::NodeId decoded = build_decoder(g_, cfg, in_, bridged);
  y2_ = build_encoder(g_, cfg, in_, decoded);
  const Graph::NodeId hop2 =
      g_.vq_transmit(cb, y2_, cons, snr_db, cfg.n_vectors, cfg.feature_dim);
  t1_ = g_.mse(y2_, y1_);
  t2_ = g_.mse(hop2, g_.stop_gradient(y2_));
  t3_ = g_.mse(y2_, g_.stop_gradient(hop2));
  total_ = combine_terms(g_, t1_, t2_, t3_, alpha_);
}

Graph::NodeId FeatureLossGraph::term_node(int k) const {
  switch (k) {
    case 1: return t1_;
    case 2: return t2_;
    case 3: return t3_;
  }
  throw Error("term_node: k must be 1, 2, or 3");
}

LossBreakdown FeatureLossGraph::breakdown() const {
  return read_breakdown(g_, t1_, t2_, t3_, total_, alpha_);
}

LossBreakdown FeatureLossGraph::eval(const ModelParams& p, const RowMatrix& y1,
                                     RngStream& rng) {
  in_.bind(g_, p);
  g_.bind(y1_, Tensor::from_matrix(y1));
  g_.forward(&rng);
  return breakdown();
}

std::pair<LossBreakdown, Vector> FeatureLossGraph::eval_grad(const ModelParams& p,
                                                             const RowMatrix& y1,
                                                             RngStream& rng) {
  const LossBreakdown b = eval(p, y1, rng);
  g_.backward(total_);
  return {b, flat_grad()};
}

std::pair<LossBreakdown, Vector> image_loss(const ModelConfig& cfg,
                                            const ModelParams& p, const Vector& image,
                                            const Constellation& cons, double snr_db,
                                            double alpha, RngStream& rng) {
  ImageLossGraph g(cfg, &cons, snr_db, alpha);
  return g.eval_grad(p, image, rng);
}

std::pair<LossBreakdown, Vector> feature_loss(const ModelConfig& cfg,
                                              const ModelParams& p,
                                              const RowMatrix& y1,
                                              const Constellation& cons,
                                              double snr_db, double alpha,
                                              RngStream& rng) {
  FeatureLossGraph g(cfg, &cons, snr_db, alpha);
  return g.eval_grad(p, y1, rng);
}

double psnr(const Vector& x, const Vector& x_hat, double peak) {
  if (x.size() != x_hat.size()) throw Error("psnr: image sizes differ");
  if (peak <= 0.0) throw Error("psnr: peak must be positive");
  const double err = (x - x_hat).squaredNorm() / static_cast<double>(x.size());
  if (err == 0.0) return 99.0;
  return 10.0 * std::log10(peak * peak / err);
}

}  // namespace fedsfr
