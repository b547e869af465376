#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "fedsfr/channel.hpp"
#include "fedsfr/rng.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

/// Reverse-mode tape over dense tensors. The op set is deliberately closed:
/// dense layers, MSE heads, and the three quantization-related nodes
/// (stop-gradient, straight-through, vq-lookup) are all the models here need.
///
/// Gradient semantics of the special nodes:
///  - stop_gradient: identity forward, zero backward.
///  - straight_through(q, x): forward takes q's value, backward routes the
///    upstream gradient to x unchanged and gives q exactly zero.
///  - vq_transmit: forward runs the digital hop (quantize/modulate/noise/
///    detect/dequantize); backward scatters the upstream gradient into the
///    selected codebook rows and gives the feature parent zero.
///
/// forward() records every discrete decision made along the way (codeword
/// selections, detector outcomes, activation branches, straight-through
/// offsets). forward_frozen() re-evaluates with those decisions pinned, which
/// makes the graph a smooth function of its inputs; that is the surrogate
/// central differences are taken on in grad_check.
class Graph {
 public:
  using NodeId = int;

  enum class OpKind {
    kInput,
    kLinear,
    kBiasAdd,
    kActivation,
    kMse,
    kAdd,
    kScale,
    kStopGradient,
    kStraightThrough,
    kVqLookup,
  };

  NodeId input(std::vector<int> shape, std::string name);
  /// w must be a 2-d input (out x in); x any node of size `in`.
  NodeId linear(NodeId w, NodeId x);
  NodeId bias_add(NodeId x, NodeId b);
  NodeId leaky_relu(NodeId x, double slope);
  NodeId mse(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  NodeId stop_gradient(NodeId x);
  NodeId straight_through(NodeId quantized, NodeId original);
  NodeId vq_transmit(NodeId codebook, NodeId features, const Constellation* cons,
                     double snr_db, int n_vectors, int dim);

  void bind(NodeId id, const Tensor& value);
  void bind(const std::map<std::string, Tensor>& bindings);
  Tensor& mutable_input(NodeId id);

  /// Evaluates every node in tape order. `rng` feeds the channel nodes and
  /// may be null for graphs without them. Throws on unbound inputs, shape
  /// mismatches, or non-finite results.
  void forward(RngStream* rng);

  /// Re-evaluates with the decisions recorded by the last forward() pinned.
  void forward_frozen();

  /// Reverse accumulation from a scalar seed node; parents are visited in a
  /// fixed order so results are reproducible bit for bit.
  void backward(NodeId seed);

  const Tensor& value(NodeId id) const { return node(id).value; }
  const Tensor& grad(NodeId id) const { return node(id).grad; }
  const std::vector<int>& sent_indices(NodeId vq) const;
  const std::vector<int>& received_indices(NodeId vq) const;
  bool saw_vq_tie() const { return saw_tie_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  const std::string& node_name(NodeId id) const { return node(id).name; }

 private:
  struct Node {
    OpKind op;
    std::array<NodeId, 2> parents{-1, -1};
    std::string name;
    Tensor value;
    Tensor grad;
    bool bound = false;  // inputs only

    double coeff = 0.0;  // scale factor or activation slope
    // vq-lookup configuration and recorded outcomes
    const Constellation* cons = nullptr;
    double snr_db = 0.0;
    int n_vectors = 0;
    int dim = 0;
    std::vector<int> sent_idx;
    std::vector<int> recv_idx;
    // recorded decisions for frozen replay
    Vector act_coeff;   // per-element slope actually applied
    Vector st_offset;   // quantized - original at record time
    Tensor sg_frozen;   // stop-gradient output at record time
  };

  NodeId push(Node n);
  Node& node(NodeId id);
  const Node& node(NodeId id) const;
  void eval_node(NodeId id, RngStream* rng, bool frozen);
  void check_finite(const Node& n) const;

  std::vector<Node> nodes_;
  bool forwarded_ = false;
  bool saw_tie_ = false;
};

/// Convenience wrapper matching the tape to a one-shot functional call:
/// binds, evaluates, and returns every node's value keyed by id.
std::map<Graph::NodeId, Tensor> forward_eval(
    Graph& g, const std::map<std::string, Tensor>& bindings, RngStream* rng);

/// Max over coordinates of |analytic - central difference| / (|analytic| + eps)
/// for one input tensor, with noise replayed from `noise_snapshot` and all
/// discrete decisions pinned to the base evaluation. Throws
/// NonDifferentiablePoint if the base evaluation hits an exact quantizer tie;
/// callers resample instead of trusting the result.
double grad_check(Graph& g, Graph::NodeId output, Graph::NodeId param, double h,
                  const RngStream& noise_snapshot, double eps_denominator = 1e-6);

}  // namespace fedsfr
