#pragma once

#include <string>
#include <vector>

#include "fedsfr/graph.hpp"
#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

/// Hidden-layer activation slope used throughout the autoencoder.
constexpr double kActivationSlope = 0.2;

/// Fully connected mirror autoencoder around a learned codebook.
///
/// Encoder widths run chw -> hidden... -> n_vectors*feature_dim with a bias
/// on every layer output. The decoder mirrors the encoder with transposed
/// weight shapes and a bias applied to every layer *input*, which keeps the
/// encoder and decoder parameter counts identical for any width profile.
struct ModelConfig {
  int channels = 1;
  int height = 8;
  int width = 8;
  int n_vectors = 16;
  int feature_dim = 2;
  std::vector<int> hidden = {32};
  int codebook_size = 16;

  int chw() const { return channels * height * width; }
  int nd() const { return n_vectors * feature_dim; }

  /// [chw, hidden..., nd]
  std::vector<int> encoder_dims() const;
  void validate() const;
};

struct ModelParams {
  std::vector<RowMatrix> enc_w;  // layer i: dims[i+1] x dims[i]
  std::vector<Vector> enc_b;     // layer i output bias
  std::vector<RowMatrix> dec_w;  // layer j: rdims[j+1] x rdims[j]
  std::vector<Vector> dec_b;     // layer j input bias
  RowMatrix codebook;            // M x d
};

struct LayerSpan {
  std::string name;
  int offset = 0;
  int length = 0;
};

/// Fixed flat layout: encoder layers (weight then bias), decoder layers
/// (weight then bias), codebook last.
struct LayerMap {
  std::vector<LayerSpan> spans;
  int dim = 0;
  int theta_len = 0;  // encoder prefix length
  int phi_len = 0;
};

LayerMap layer_map(const ModelConfig& cfg);

/// Deterministic init: weights i.i.d. uniform in [-1/sqrt(fan_in),
/// 1/sqrt(fan_in)], biases zero, codebook rows uniform in [-1/sqrt(d),
/// 1/sqrt(d)].
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

RowMatrix encode(const ModelConfig& cfg, const ModelParams& p, const Vector& image);
Vector decode(const ModelConfig& cfg, const ModelParams& p, const RowMatrix& features);

Vector flatten(const ModelConfig& cfg, const ModelParams& p);
ModelParams unflatten(const ModelConfig& cfg, const Vector& flat);

/// Graph-side mirror of the model: parameter input nodes shared between the
/// encoder and decoder builders on the same graph.
struct ModelGraphInputs {
  std::vector<Graph::NodeId> enc_w, enc_b, dec_w, dec_b;
  Graph::NodeId codebook = -1;

  void bind(Graph& g, const ModelParams& p) const;
  /// Collects parameter gradients into the flat layout of layer_map().
  Vector flat_grad(const Graph& g, const ModelConfig& cfg) const;
  std::vector<Graph::NodeId> all_ids() const;
};

Graph::NodeId build_encoder(Graph& g, const ModelConfig& cfg, ModelGraphInputs& in,
                            Graph::NodeId image);
Graph::NodeId build_decoder(Graph& g, const ModelConfig& cfg, ModelGraphInputs& in,
                            Graph::NodeId features);
Graph::NodeId add_codebook_input(Graph& g, const ModelConfig& cfg, ModelGraphInputs& in);

// Checkpoint files: "FSFR" magic, u32 version, u32 config words
// (C,H,W,N,d,M,hidden count,hidden widths...), then the flat parameter
// vector as little-endian f64.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& p);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

}  // namespace fedsfr
