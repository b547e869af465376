#include "fedsfr/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace fedsfr {

std::vector<int> ModelConfig::encoder_dims() const {
  std::vector<int> dims;
  dims.push_back(chw());
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(nd());
  return dims;
}

void ModelConfig::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0)
    throw Error("model config: image dimensions must be positive");
  if (n_vectors <= 0 || feature_dim <= 0)
    throw Error("model config: feature dimensions must be positive");
  if (codebook_size < 2) throw Error("model config: codebook size must be >= 2");
  for (int h : hidden)
    if (h <= 0) throw Error("model config: zero-width hidden layer");
}

LayerMap layer_map(const ModelConfig& cfg) {
  cfg.validate();
  LayerMap m;
  const auto dims = cfg.encoder_dims();
  const int layers = static_cast<int>(dims.size()) - 1;
  int off = 0;
  auto span = [&](const std::string& name, int len) {
    m.spans.push_back({name, off, len});
    off += len;
  };
  for (int i = 0; i < layers; ++i) {
    span("theta." + std::to_string(i) + ".w", dims[i + 1] * dims[i]);
    span("theta." + std::to_string(i) + ".b", dims[i + 1]);
  }
  m.theta_len = off;
  for (int j = 0; j < layers; ++j) {
    const int in = dims[layers - j];
    const int out = dims[layers - j - 1];
    span("phi." + std::to_string(j) + ".w", out * in);
    span("phi." + std::to_string(j) + ".b", in);
  }
  m.phi_len = off - m.theta_len;
  span("codebook", cfg.codebook_size * cfg.feature_dim);
  m.dim = off;
  return m;
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RngStream rng = derive_stream(seed, {stream_tag::kInit});
  const auto dims = cfg.encoder_dims();
  const int layers = static_cast<int>(dims.size()) - 1;

  auto draw_matrix = [&](int rows, int cols, double bound) {
    RowMatrix w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
    return w;
  };

  ModelParams p;
  for (int i = 0; i < layers; ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    p.enc_w.push_back(draw_matrix(dims[i + 1], dims[i], bound));
    p.enc_b.push_back(Vector::Zero(dims[i + 1]));
  }
  for (int j = 0; j < layers; ++j) {
    const int in = dims[layers - j];
    const int out = dims[layers - j - 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    p.dec_w.push_back(draw_matrix(out, in, bound));
    p.dec_b.push_back(Vector::Zero(in));
  }
  const double cb_bound = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  p.codebook = draw_matrix(cfg.codebook_size, cfg.feature_dim, cb_bound);
  return p;
}

RowMatrix encode(const ModelConfig& cfg, const ModelParams& p, const Vector& image) {
  if (image.size() != cfg.chw())
    throw Error("encode: image size " + std::to_string(image.size()) +
                " does not match config " + std::to_string(cfg.chw()));
  const int layers = static_cast<int>(p.enc_w.size());
  Vector x = image;
  for (int i = 0; i < layers; ++i) {
    Vector u = p.enc_w[i] * x;
    u += p.enc_b[i];
    if (i + 1 < layers)
      u = (u.array() >= 0.0).select(u, kActivationSlope * u);
    x = std::move(u);
  }
  return Eigen::Map<const RowMatrix>(x.data(), cfg.n_vectors, cfg.feature_dim);
}

Vector decode(const ModelConfig& cfg, const ModelParams& p, const RowMatrix& features) {
  if (features.size() != cfg.nd())
    throw Error("decode: feature size " + std::to_string(features.size()) +
                " does not match config " + std::to_string(cfg.nd()));
  const int layers = static_cast<int>(p.dec_w.size());
  Vector x = Eigen::Map<const Vector>(features.data(), features.size());
  for (int j = 0; j < layers; ++j) {
    Vector u = p.dec_w[j] * (x + p.dec_b[j]);
    if (j + 1 < layers)
      u = (u.array() >= 0.0).select(u, kActivationSlope * u);
    x = std::move(u);
  }
  return x;
}

Vector flatten(const ModelConfig& cfg, const ModelParams& p) {
  const LayerMap m = layer_map(cfg);
  Vector flat(m.dim);
  int off = 0;
  auto put_matrix = [&](const RowMatrix& w) {
    flat.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    off += static_cast<int>(w.size());
  };
  auto put_vector = [&](const Vector& v) {
    flat.segment(off, v.size()) = v;
    off += static_cast<int>(v.size());
  };
  for (std::size_t i = 0; i < p.enc_w.size(); ++i) {
    put_matrix(p.enc_w[i]);
    put_vector(p.enc_b[i]);
  }
  for (std::size_t j = 0; j < p.dec_w.size(); ++j) {
    put_matrix(p.dec_w[j]);
    put_vector(p.dec_b[j]);
  }
  put_matrix(p.codebook);
  if (off != m.dim) throw Error("flatten: layout inconsistency");
  return flat;
}

ModelParams unflatten(const ModelConfig& cfg, const Vector& flat) {
  const LayerMap m = layer_map(cfg);
  if (flat.size() != m.dim)
    throw Error("unflatten: expected " + std::to_string(m.dim) + " values, got " +
                std::to_string(flat.size()));
  const auto dims = cfg.encoder_dims();
  const int layers = static_cast<int>(dims.size()) - 1;
  ModelParams p;
  int off = 0;
  auto take_matrix = [&](int rows, int cols) {
    RowMatrix w(rows, cols);
    std::memcpy(w.data(), flat.data() + off, sizeof(double) * w.size());
    off += rows * cols;
    return w;
  };
  auto take_vector = [&](int n) {
    Vector v = flat.segment(off, n);
    off += n;
    return v;
  };
  for (int i = 0; i < layers; ++i) {
    p.enc_w.push_back(take_matrix(dims[i + 1], dims[i]));
    p.enc_b.push_back(take_vector(dims[i + 1]));
  }
  for (int j = 0; j < layers; ++j) {
    const int in = dims[layers - j];
    const int out = dims[layers - j - 1];
    p.dec_w.push_back(take_matrix(out, in));
    p.dec_b.push_back(take_vector(in));
  }
  p.codebook = take_matrix(cfg.codebook_size, cfg.feature_dim);
  return p;
}

void ModelGraphInputs::bind(Graph& g, const ModelParams& p) const {
  for (std::size_t i = 0; i < enc_w.size(); ++i) {
    g.bind(enc_w[i], Tensor::from_matrix(p.enc_w[i]));
    g.bind(enc_b[i], Tensor::from_vector(p.enc_b[i]));
  }
  for (std::size_t j = 0; j < dec_w.size(); ++j) {
    g.bind(dec_w[j], Tensor::from_matrix(p.dec_w[j]));
    g.bind(dec_b[j], Tensor::from_vector(p.dec_b[j]));
  }
  if (codebook >= 0) g.bind(codebook, Tensor::from_matrix(p.codebook));
}

Vector ModelGraphInputs::flat_grad(const Graph& g, const ModelConfig& cfg) const {
  const LayerMap m = layer_map(cfg);
  Vector flat = Vector::Zero(m.dim);
  int off = 0;
  auto put = [&](Graph::NodeId id) {
    const Vector& grad = g.grad(id).data;
    flat.segment(off, grad.size()) = grad;
    off += static_cast<int>(grad.size());
  };
  for (std::size_t i = 0; i < enc_w.size(); ++i) {
    put(enc_w[i]);
    put(enc_b[i]);
  }
  for (std::size_t j = 0; j < dec_w.size(); ++j) {
    put(dec_w[j]);
    put(dec_b[j]);
  }
  put(codebook);
  return flat;
}

std::vector<Graph::NodeId> ModelGraphInputs::all_ids() const {
  std::vector<Graph::NodeId> ids;
  for (std::size_t i = 0; i < enc_w.size(); ++i) {
    ids.push_back(enc_w[i]);
    ids.push_back(enc_b[i]);
  }
  for (std::size_t j = 0; j < dec_w.size(); ++j) {
    ids.push_back(dec_w[j]);
    ids.push_back(dec_b[j]);
  }
  if (codebook >= 0) ids.push_back(codebook);
  return ids;
}

Graph::NodeId build_encoder(Graph& g, const ModelConfig& cfg, ModelGraphInputs& in,
                            Graph::NodeId image) {
  const auto dims = cfg.encoder_dims();
  const int layers = static_cast<int>(dims.size()) - 1;
  if (in.enc_w.empty()) {
    for (int i = 0; i < layers; ++i) {
      in.enc_w.push_back(
          g.input({dims[i + 1], dims[i]}, "theta." + std::to_string(i) + ".w"));
      in.enc_b.push_back(g.input({dims[i + 1]}, "theta." + std::to_string(i) + ".b"));
    }
  }
  Graph::NodeId x = image;
  for (int i = 0; i < layers; ++i) {
    x = g.bias_add(g.linear(in.enc_w[i], x), in.enc_b[i]);
    if (i + 1 < layers) x = g.leaky_relu(x, kActivationSlope);
  }
  return x;
}

Graph::NodeId build_decoder(Graph& g, const ModelConfig& cfg, ModelGraphInputs& in,
                            Graph::NodeId features) {
  const auto dims = cfg.encoder_dims();
  const int layers = static_cast<int>(dims.size()) - 1;
  if (in.dec_w.empty()) {
    for (int j = 0; j < layers; ++j) {
      const int width_in = dims[layers - j];
      const int width_out = dims[layers - j - 1];
      in.dec_w.push_back(
          g.input({width_out, width_in}, "phi." + std::to_string(j) + ".w"));
      in.dec_b.push_back(g.input({width_in}, "phi." + std::to_string(j) + ".b"));
    }
  }
  Graph::NodeId x = features;
  for (int j = 0; j < layers; ++j) {
    x = g.linear(in.dec_w[j], g.bias_add(x, in.dec_b[j]));
    if (j + 1 < layers) x = g.leaky_relu(x, kActivationSlope);
  }
  return x;
}

Graph::NodeId add_codebook_input(Graph& g, const ModelConfig& cfg,
                                 ModelGraphInputs& in) {
  if (in.codebook < 0)
    in.codebook = g.input({cfg.codebook_size, cfg.feature_dim}, "codebook");
  return in.codebook;
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw Error("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

constexpr char kMagic[4] = {'F', 'S', 'F', 'R'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(cfg.channels));
  write_u32(os, static_cast<std::uint32_t>(cfg.height));
  write_u32(os, static_cast<std::uint32_t>(cfg.width));
  write_u32(os, static_cast<std::uint32_t>(cfg.n_vectors));
  write_u32(os, static_cast<std::uint32_t>(cfg.feature_dim));
  write_u32(os, static_cast<std::uint32_t>(cfg.codebook_size));
  write_u32(os, static_cast<std::uint32_t>(cfg.hidden.size()));
  for (int h : cfg.hidden) write_u32(os, static_cast<std::uint32_t>(h));
  const Vector flat = flatten(cfg, p);
  for (Eigen::Index i = 0; i < flat.size(); ++i) write_f64(os, flat[i]);
  if (!os) throw Error("checkpoint: write failed for " + path);
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("checkpoint: bad magic in " + path);
  if (read_u32(is) != kVersion) throw Error("checkpoint: unsupported version");
  ModelConfig cfg;
  cfg.channels = static_cast<int>(read_u32(is));
  cfg.height = static_cast<int>(read_u32(is));
  cfg.width = static_cast<int>(read_u32(is));
  cfg.n_vectors = static_cast<int>(read_u32(is));
  cfg.feature_dim = static_cast<int>(read_u32(is));
  cfg.codebook_size = static_cast<int>(read_u32(is));
  const std::uint32_t nh = read_u32(is);
  cfg.hidden.clear();
  for (std::uint32_t i = 0; i < nh; ++i)
    cfg.hidden.push_back(static_cast<int>(read_u32(is)));
  cfg.validate();
  const LayerMap m = layer_map(cfg);
  Vector flat(m.dim);
  for (int i = 0; i < m.dim; ++i) flat[i] = read_f64(is);
  if (!flat.allFinite()) throw Error("checkpoint: non-finite parameters");
  return {cfg, unflatten(cfg, flat)};
}

}  // namespace fedsfr
