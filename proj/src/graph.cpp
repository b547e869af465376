#include "fedsfr/graph.hpp"

#include <algorithm>
#include <cmath>

namespace fedsfr {

namespace {

std::string describe(Graph::NodeId id, const std::string& name) {
  std::string s = "node " + std::to_string(id);
  if (!name.empty()) s += " (" + name + ")";
  return s;
}

}  // namespace

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::Node& Graph::node(NodeId id) {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw Error("invalid node id " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::node(NodeId id) const {
  return const_cast<Graph*>(this)->node(id);
}

Graph::NodeId Graph::input(std::vector<int> shape, std::string name) {
  Node n;
  n.op = OpKind::kInput;
  n.name = std::move(name);
  n.value = Tensor::zeros(shape);
  return push(std::move(n));
}

Graph::NodeId Graph::linear(NodeId w, NodeId x) {
  const Node& wn = node(w);
  const Node& xn = node(x);
  if (wn.value.shape.size() != 2)
    throw Error("linear: weight " + describe(w, wn.name) + " is not 2-d");
  if (wn.value.cols() != xn.value.size())
    throw Error("linear: " + describe(w, wn.name) + " expects input of size " +
                std::to_string(wn.value.cols()) + ", got " +
                std::to_string(xn.value.size()));
  Node n;
  n.op = OpKind::kLinear;
  n.parents = {w, x};
  n.value = Tensor::zeros({wn.value.rows()});
  return push(std::move(n));
}

Graph::NodeId Graph::bias_add(NodeId x, NodeId b) {
  if (node(x).value.size() != node(b).value.size())
    throw Error("bias_add: size mismatch at " + describe(b, node(b).name));
  Node n;
  n.op = OpKind::kBiasAdd;
  n.parents = {x, b};
  n.value = Tensor::zeros(node(x).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::leaky_relu(NodeId x, double slope) {
  Node n;
  n.op = OpKind::kActivation;
  n.parents = {x, -1};
  n.coeff = slope;
  n.value = Tensor::zeros(node(x).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::mse(NodeId a, NodeId b) {
  if (node(a).value.size() != node(b).value.size())
    throw Error("mse: operand sizes differ between " + describe(a, node(a).name) +
                " and " + describe(b, node(b).name));
  Node n;
  n.op = OpKind::kMse;
  n.parents = {a, b};
  n.value = Tensor::scalar(0.0);
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  if (node(a).value.size() != node(b).value.size())
    throw Error("add: size mismatch at " + describe(b, node(b).name));
  Node n;
  n.op = OpKind::kAdd;
  n.parents = {a, b};
  n.value = Tensor::zeros(node(a).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId x, double c) {
  Node n;
  n.op = OpKind::kScale;
  n.parents = {x, -1};
  n.coeff = c;
  n.value = Tensor::zeros(node(x).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::stop_gradient(NodeId x) {
  Node n;
  n.op = OpKind::kStopGradient;
  n.parents = {x, -1};
  n.value = Tensor::zeros(node(x).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::straight_through(NodeId quantized, NodeId original) {
  if (node(quantized).value.size() != node(original).value.size())
    throw Error("straight_through: size mismatch between " +
                describe(quantized, node(quantized).name) + " and " +
                describe(original, node(original).name));
  Node n;
  n.op = OpKind::kStraightThrough;
  n.parents = {quantized, original};
  n.value = Tensor::zeros(node(quantized).value.shape);
  return push(std::move(n));
}

Graph::NodeId Graph::vq_transmit(NodeId codebook, NodeId features,
                                 const Constellation* cons, double snr_db,
                                 int n_vectors, int dim) {
  const Node& cb = node(codebook);
  if (cb.value.shape.size() != 2 || cb.value.cols() != dim)
    throw Error("vq_transmit: codebook at " + describe(codebook, cb.name) +
                " must be M x " + std::to_string(dim));
  if (cons == nullptr || cons->order != cb.value.rows())
    throw Error("vq_transmit: constellation order must match codebook size");
  if (node(features).value.size() != n_vectors * dim)
    throw Error("vq_transmit: feature node " +
                describe(features, node(features).name) + " has size " +
                std::to_string(node(features).value.size()) + ", expected " +
                std::to_string(n_vectors * dim));
  Node n;
  n.op = OpKind::kVqLookup;
  n.parents = {codebook, features};
  n.cons = cons;
  n.snr_db = snr_db;
  n.n_vectors = n_vectors;
  n.dim = dim;
  n.value = Tensor::zeros({n_vectors, dim});
  return push(std::move(n));
}

void Graph::bind(NodeId id, const Tensor& value) {
  Node& n = node(id);
  if (n.op != OpKind::kInput)
    throw Error("bind: " + describe(id, n.name) + " is not an input");
  if (value.size() != n.value.size())
    throw Error("bind: " + describe(id, n.name) + " expects size " +
                std::to_string(n.value.size()) + ", got " +
                std::to_string(value.size()));
  n.value.data = value.data;
  n.bound = true;
}

void Graph::bind(const std::map<std::string, Tensor>& bindings) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.op != OpKind::kInput || n.name.empty()) continue;
    auto it = bindings.find(n.name);
    if (it != bindings.end()) bind(static_cast<NodeId>(i), it->second);
  }
}

Tensor& Graph::mutable_input(NodeId id) {
  Node& n = node(id);
  if (n.op != OpKind::kInput)
    throw Error("mutable_input: " + describe(id, n.name) + " is not an input");
  return n.value;
}

void Graph::check_finite(const Node& n) const {
  if (!n.value.all_finite())
    throw Error("non-finite value produced at " +
                describe(static_cast<NodeId>(&n - nodes_.data()), n.name));
}

void Graph::eval_node(NodeId id, RngStream* rng, bool frozen) {
  Node& n = node(id);
  const auto p0 = [&]() -> const Tensor& { return node(n.parents[0]).value; };
  const auto p1 = [&]() -> const Tensor& { return node(n.parents[1]).value; };

  switch (n.op) {
    case OpKind::kInput:
      if (!n.bound) throw Error("unbound input at " + describe(id, n.name));
      break;
    case OpKind::kLinear: {
      const Tensor& w = p0();
      n.value.data.noalias() = w.mat() * p1().data;
      break;
    }
    case OpKind::kBiasAdd:
      n.value.data = p0().data + p1().data;
      break;
    case OpKind::kActivation: {
      const Vector& x = p0().data;
      if (!frozen) {
        n.act_coeff = (x.array() >= 0.0).select(Vector::Ones(x.size()),
                                                Vector::Constant(x.size(), n.coeff));
      }
      n.value.data = n.act_coeff.cwiseProduct(x);
      break;
    }
    case OpKind::kMse:
      n.value.data[0] =
          (p0().data - p1().data).squaredNorm() / static_cast<double>(p0().size());
      break;
    case OpKind::kAdd:
      n.value.data = p0().data + p1().data;
      break;
    case OpKind::kScale:
      n.value.data = n.coeff * p0().data;
      break;
    case OpKind::kStopGradient:
      if (!frozen) {
        n.value.data = p0().data;
        n.sg_frozen = n.value;
      } else {
        n.value.data = n.sg_frozen.data;
      }
      break;
    case OpKind::kStraightThrough:
      if (!frozen) {
        n.value.data = p0().data;
        n.st_offset = p0().data - p1().data;
      } else {
        n.value.data = p1().data + n.st_offset;
      }
      break;
    case OpKind::kVqLookup: {
      const Tensor& cb = p0();
      Eigen::Map<const RowMatrix> feats(p1().data.data(), n.n_vectors, n.dim);
      if (!frozen) {
        if (rng == nullptr)
          throw Error("forward: rng required for " + describe(id, n.name));
        TransmitResult tr = transmit(cb.mat(), *n.cons, feats, n.snr_db, *rng);
        n.sent_idx = std::move(tr.sent_idx);
        n.recv_idx = std::move(tr.recv_idx);
        if (tr.tie) saw_tie_ = true;
        n.value.data = Eigen::Map<const Vector>(tr.received.data(), tr.received.size());
      } else {
        auto out = n.value.mat();
        for (int i = 0; i < n.n_vectors; ++i)
          out.row(i) = cb.mat().row(n.recv_idx[static_cast<std::size_t>(i)]);
      }
      break;
    }
  }
  check_finite(n);
}

void Graph::forward(RngStream* rng) {
  saw_tie_ = false;
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id)
    eval_node(id, rng, /*frozen=*/false);
  forwarded_ = true;
}

void Graph::forward_frozen() {
  if (!forwarded_) throw Error("forward_frozen: no recorded forward pass");
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id)
    eval_node(id, nullptr, /*frozen=*/true);
}

void Graph::backward(NodeId seed) {
  if (!forwarded_) throw Error("backward: run forward first");
  Node& s = node(seed);
  if (!s.value.is_scalar())
    throw Error("backward: seed " + describe(seed, s.name) + " is not scalar");

  for (Node& n : nodes_) {
    n.grad.shape = n.value.shape;
    n.grad.data = Vector::Zero(n.value.size());
  }
  s.grad.data[0] = 1.0;

  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Vector& g = n.grad.data;
    switch (n.op) {
      case OpKind::kInput:
        break;
      case OpKind::kLinear: {
        Node& w = node(n.parents[0]);
        Node& x = node(n.parents[1]);
        Eigen::Map<RowMatrix> dw(w.grad.data.data(), w.value.rows(), w.value.cols());
        dw.noalias() += g * x.value.data.transpose();
        x.grad.data.noalias() += w.value.mat().transpose() * g;
        break;
      }
      case OpKind::kBiasAdd:
        node(n.parents[0]).grad.data += g;
        node(n.parents[1]).grad.data += g;
        break;
      case OpKind::kActivation:
        node(n.parents[0]).grad.data += n.act_coeff.cwiseProduct(g);
        break;
      case OpKind::kMse: {
        Node& a = node(n.parents[0]);
        Node& b = node(n.parents[1]);
        const double c = 2.0 * g[0] / static_cast<double>(a.value.size());
        const Vector diff = a.value.data - b.value.data;
        a.grad.data += c * diff;
        b.grad.data -= c * diff;
        break;
      }
      case OpKind::kAdd:
        node(n.parents[0]).grad.data += g;
        node(n.parents[1]).grad.data += g;
        break;
      case OpKind::kScale:
        node(n.parents[0]).grad.data += n.coeff * g;
        break;
      case OpKind::kStopGradient:
        break;  // blocks by definition
      case OpKind::kStraightThrough:
        node(n.parents[1]).grad.data += g;  // original branch only
        break;
      case OpKind::kVqLookup: {
        Node& cb = node(n.parents[0]);
        Eigen::Map<RowMatrix> dcb(cb.grad.data.data(), cb.value.rows(),
                                  cb.value.cols());
        Eigen::Map<const RowMatrix> go(g.data(), n.n_vectors, n.dim);
        for (int i = 0; i < n.n_vectors; ++i)
          dcb.row(n.recv_idx[static_cast<std::size_t>(i)]) += go.row(i);
        break;  // feature parent: selection is piecewise constant
      }
    }
  }
}

const std::vector<int>& Graph::sent_indices(NodeId vq) const {
  const Node& n = node(vq);
  if (n.op != OpKind::kVqLookup) throw Error("sent_indices: not a vq node");
  return n.sent_idx;
}

const std::vector<int>& Graph::received_indices(NodeId vq) const {
  const Node& n = node(vq);
  if (n.op != OpKind::kVqLookup) throw Error("received_indices: not a vq node");
  return n.recv_idx;
}

std::map<Graph::NodeId, Tensor> forward_eval(
    Graph& g, const std::map<std::string, Tensor>& bindings, RngStream* rng) {
  g.bind(bindings);
  g.forward(rng);
  std::map<Graph::NodeId, Tensor> out;
  for (Graph::NodeId id = 0; id < g.node_count(); ++id) out[id] = g.value(id);
  return out;
}

double grad_check(Graph& g, Graph::NodeId output, Graph::NodeId param, double h,
                  const RngStream& noise_snapshot, double eps_denominator) {
  RngStream rng = noise_snapshot;
  g.forward(&rng);
  if (g.saw_vq_tie())
    throw NonDifferentiablePoint("grad_check: non-differentiable point (vq tie)");
  g.backward(output);
  const Vector analytic = g.grad(param).data;

  Tensor& p = g.mutable_input(param);
  double worst = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    const double saved = p.data[i];
    p.data[i] = saved + h;
    g.forward_frozen();
    const double fp = g.value(output).data[0];
    p.data[i] = saved - h;
    g.forward_frozen();
    const double fm = g.value(output).data[0];
    p.data[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double rel =
        std::abs(analytic[i] - fd) / (std::abs(analytic[i]) + eps_denominator);
    worst = std::max(worst, rel);
  }
  g.forward_frozen();  // restore recorded values
  return worst;
}

}  // namespace fedsfr
