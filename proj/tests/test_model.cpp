#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fedsfr/model.hpp"

using namespace fedsfr;

namespace {

const ModelConfig kToy{1, 2, 2, 2, 2, {}, 4};       // chw == nd == 4
const ModelConfig kDesk{1, 8, 8, 16, 2, {32}, 16};  // default desk shape

ModelParams random_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = init_model(cfg, seed);
  RngStream rng(seed ^ 0xabc);
  for (auto& b : p.enc_b) b = rng.normal_vector(static_cast<int>(b.size()));
  for (auto& b : p.dec_b) b = rng.normal_vector(static_cast<int>(b.size()));
  return p;
}

}  // namespace

TEST_CASE("init is deterministic in the seed") {
  const ModelParams a = init_model(kDesk, 42);
  const ModelParams b = init_model(kDesk, 42);
  const ModelParams c = init_model(kDesk, 43);
  CHECK(flatten(kDesk, a) == flatten(kDesk, b));
  CHECK(flatten(kDesk, a) != flatten(kDesk, c));
}

TEST_CASE("parameter counting for the direct linear model") {
  // chw*nd weights + nd bias per half, plus the codebook.
  const LayerMap m = layer_map(kToy);
  CHECK(m.theta_len == 4 * 4 + 4);
  CHECK(m.phi_len == m.theta_len);
  CHECK(m.dim == 2 * (4 * 4 + 4) + 4 * 2);
  CHECK(m.spans.back().name == "codebook");
  CHECK(m.spans.back().offset + m.spans.back().length == m.dim);
  CHECK(m.spans.back().length == kToy.codebook_size * kToy.feature_dim);
}

TEST_CASE("encoder and decoder parameter counts match for any width profile") {
  for (const ModelConfig& cfg :
       {kToy, kDesk, ModelConfig{3, 4, 4, 8, 2, {16, 8}, 4}}) {
    const LayerMap m = layer_map(cfg);
    CHECK(m.theta_len == m.phi_len);
    int total = 0;
    for (const LayerSpan& s : m.spans) total += s.length;
    CHECK(total == m.dim);
  }
}

TEST_CASE("codebook init stays inside its declared range") {
  const ModelParams p = init_model(kDesk, 9);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kDesk.feature_dim));
  CHECK(p.codebook.maxCoeff() <= bound);
  CHECK(p.codebook.minCoeff() >= -bound);
}

TEST_CASE("zero parameters map everything to zero") {
  const ModelParams p = unflatten(kDesk, Vector::Zero(layer_map(kDesk).dim));
  const Vector image = Vector::Constant(kDesk.chw(), 0.3);
  const RowMatrix y = encode(kDesk, p, image);
  CHECK(y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(decode(kDesk, p, RowMatrix::Zero(kDesk.n_vectors, kDesk.feature_dim))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("identity-constructed pair reconstructs exactly") {
  ModelParams p;
  p.enc_w.push_back(RowMatrix::Identity(4, 4));
  p.enc_b.push_back(Vector::Zero(4));
  p.dec_w.push_back(RowMatrix::Identity(4, 4));
  p.dec_b.push_back(Vector::Zero(4));
  p.codebook = RowMatrix::Zero(4, 2);
  Vector image(4);
  image << 0.1, 0.9, 0.4, 0.7;
  const RowMatrix y = encode(kToy, p, image);
  CHECK(decode(kToy, p, y) == image);
}

TEST_CASE("encode is deterministic and matches the graph evaluation bitwise") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const ModelParams p = init_model(cfg, 31);
  RngStream rng(17);
  Vector image(cfg.chw());
  for (int i = 0; i < cfg.chw(); ++i) image[i] = rng.uniform();

  const RowMatrix y1 = encode(cfg, p, image);
  const RowMatrix y2 = encode(cfg, p, image);
  CHECK(y1 == y2);

  Graph g;
  ModelGraphInputs in;
  const auto img = g.input({cfg.chw()}, "image");
  const auto out = build_encoder(g, cfg, in, img);
  in.bind(g, p);
  g.bind(img, Tensor::from_vector(image));
  g.forward(nullptr);
  CHECK(g.value(out).data == Eigen::Map<const Vector>(y1.data(), y1.size()));
}

TEST_CASE("encoder Jacobian agrees with central differences on a toy image") {
  const ModelConfig cfg{2, 2, 2, 2, 2, {6}, 4};  // 2x2x2 input
  const ModelParams p = random_params(cfg, 3);

  Graph g;
  ModelGraphInputs in;
  const auto img = g.input({cfg.chw()}, "image");
  const auto out = build_encoder(g, cfg, in, img);
  // A fixed random functional turns the Jacobian check into a scalar one.
  const auto probe = g.input({1, cfg.nd()}, "probe");
  const auto s = g.linear(probe, out);
  const auto zero = g.input({1}, "zero");
  const auto scalar = g.mse(s, zero);

  RngStream rng(8);
  in.bind(g, p);
  g.bind(img, Tensor::from_vector(rng.normal_vector(cfg.chw())));
  g.bind(probe, Tensor({1, cfg.nd()}, rng.normal_vector(cfg.nd())));
  g.bind(zero, Tensor::scalar(0.0));

  double worst = grad_check(g, scalar, img, 1e-4, RngStream(0));
  for (Graph::NodeId id : in.all_ids())
    worst = std::max(worst, grad_check(g, scalar, id, 1e-4, RngStream(0)));
  CHECK(worst <= 1e-3);
}

TEST_CASE("flatten/unflatten is the identity and the codebook sits last") {
  const ModelParams p = random_params(kDesk, 77);
  const Vector flat = flatten(kDesk, p);
  const ModelParams q = unflatten(kDesk, flat);
  CHECK(flatten(kDesk, q) == flat);

  const int cb_len = kDesk.codebook_size * kDesk.feature_dim;
  const Vector tail = flat.tail(cb_len);
  CHECK(tail == Eigen::Map<const Vector>(p.codebook.data(), cb_len));
}

TEST_CASE("checkpoint files round-trip bitwise") {
  const ModelParams p = random_params(kDesk, 5);
  const std::string path = "/tmp/fedsfr_test_model.fsfr";
  save_checkpoint(path, kDesk, p);
  const auto [cfg2, p2] = load_checkpoint(path);
  CHECK(cfg2.hidden == kDesk.hidden);
  CHECK(flatten(cfg2, p2) == flatten(kDesk, p));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects garbage") {
  const std::string path = "/tmp/fedsfr_test_bad.fsfr";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE then some bytes";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), Error);
  {
    std::ofstream os(path, std::ios::binary);
    os << "FSFR";  // truncated after the magic
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("config validation rejects degenerate shapes") {
  ModelConfig bad = kDesk;
  bad.hidden = {0};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = kDesk;
  bad.codebook_size = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
}
