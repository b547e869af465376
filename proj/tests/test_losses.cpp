#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "fedsfr/losses.hpp"

using namespace fedsfr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const ModelConfig kToy{1, 2, 2, 2, 2, {}, 4};       // chw == nd, direct linear
const ModelConfig kSmall{1, 4, 4, 4, 2, {8}, 4};

// Identity autoencoder with a codebook of four well-separated rows.
ModelParams identity_params() {
  ModelParams p;
  p.enc_w.push_back(RowMatrix::Identity(4, 4));
  p.enc_b.push_back(Vector::Zero(4));
  p.dec_w.push_back(RowMatrix::Identity(4, 4));
  p.dec_b.push_back(Vector::Zero(4));
  p.codebook.resize(4, 2);
  p.codebook << 0.1, 0.2, 0.8, 0.9, 0.1, 0.9, 0.8, 0.2;
  return p;
}

int codebook_offset(const ModelConfig& cfg) {
  const LayerMap m = layer_map(cfg);
  return m.spans.back().offset;
}

}  // namespace

TEST_CASE("image loss vanishes on the perfectly matched configuration") {
  const ModelParams p = identity_params();
  // Rows of the image equal codebook rows, the channel is clean, and the
  // autoencoder is the identity: every residual is exactly zero.
  Vector image(4);
  image << 0.1, 0.2, 0.8, 0.9;  // rows 0 and 1 of the codebook
  const Constellation cons = Constellation::qam(4);
  RngStream rng(1);
  auto [b, grad] = image_loss(kToy, p, image, cons, kInf, 1.0, rng);
  CHECK(b.total == 0.0);
  CHECK(b.term1 == 0.0);
  CHECK(b.term2 == 0.0);
  CHECK(b.term3 == 0.0);
  CHECK(grad == Vector::Zero(grad.size()));
}

TEST_CASE("feature loss vanishes on the perfectly matched configuration") {
  const ModelParams p = identity_params();
  RowMatrix y1(2, 2);
  y1 << 0.1, 0.2, 0.8, 0.9;
  const Constellation cons = Constellation::qam(4);
  RngStream rng(1);
  auto [b, grad] = feature_loss(kToy, p, y1, cons, kInf, 1.0, rng);
  CHECK(b.total == 0.0);
  CHECK(grad == Vector::Zero(grad.size()));
}

TEST_CASE("alpha = 0 kills the codebook gradient exactly, in both losses") {
  const ModelParams p = init_model(kSmall, 5);
  const Constellation cons = Constellation::qam(kSmall.codebook_size);
  RngStream data_rng(6);
  Vector image(kSmall.chw());
  for (int i = 0; i < kSmall.chw(); ++i) image[i] = data_rng.uniform();

  const int cb_off = codebook_offset(kSmall);
  const int cb_len = kSmall.codebook_size * kSmall.feature_dim;

  RngStream rng(7);
  auto [bi, gi] = image_loss(kSmall, p, image, cons, 15.0, 0.0, rng);
  CHECK(gi.segment(cb_off, cb_len) == Vector::Zero(cb_len));
  CHECK(gi.head(cb_off).cwiseAbs().maxCoeff() > 0.0);

  RowMatrix y1(kSmall.n_vectors, kSmall.feature_dim);
  for (Eigen::Index i = 0; i < y1.size(); ++i) y1(i / 2, i % 2) = data_rng.normal();
  auto [bf, gf] = feature_loss(kSmall, p, y1, cons, 15.0, 0.0, rng);
  CHECK(gf.segment(cb_off, cb_len) == Vector::Zero(cb_len));
  CHECK(gf.head(cb_off).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gradient routing: term supports split between codebook and the rest") {
  const ModelParams p = init_model(kSmall, 11);
  const Constellation cons = Constellation::qam(kSmall.codebook_size);
  RngStream data_rng(12);
  Vector image(kSmall.chw());
  for (int i = 0; i < kSmall.chw(); ++i) image[i] = data_rng.uniform();

  ImageLossGraph loss(kSmall, &cons, 15.0, 1.0);
  RngStream rng(13);
  loss.eval(p, image, rng);
  const int cb_off = codebook_offset(kSmall);
  const int cb_len = kSmall.codebook_size * kSmall.feature_dim;

  loss.graph().backward(loss.term_node(2));
  const Vector g2 = loss.flat_grad();
  CHECK(g2.head(cb_off) == Vector::Zero(cb_off));
  CHECK(g2.segment(cb_off, cb_len).cwiseAbs().maxCoeff() > 0.0);

  loss.graph().backward(loss.term_node(3));
  const Vector g3 = loss.flat_grad();
  CHECK(g3.segment(cb_off, cb_len) == Vector::Zero(cb_len));

  loss.graph().backward(loss.term_node(1));
  const Vector g1 = loss.flat_grad();
  CHECK(g1.segment(cb_off, cb_len) == Vector::Zero(cb_len));
}

TEST_CASE("feature loss routes codebook updates through the second hop only") {
  const ModelParams p = init_model(kSmall, 21);
  const Constellation cons = Constellation::qam(kSmall.codebook_size);
  RngStream data_rng(22);
  RowMatrix y1(kSmall.n_vectors, kSmall.feature_dim);
  for (Eigen::Index i = 0; i < y1.size(); ++i) y1(i / 2, i % 2) = data_rng.normal();

  FeatureLossGraph loss(kSmall, &cons, 15.0, 1.0);
  RngStream rng(23);
  loss.eval(p, y1, rng);
  const int cb_off = codebook_offset(kSmall);
  const int cb_len = kSmall.codebook_size * kSmall.feature_dim;

  loss.graph().backward(loss.term_node(2));
  const Vector g2 = loss.flat_grad();
  CHECK(g2.head(cb_off) == Vector::Zero(cb_off));

  loss.graph().backward(loss.term_node(1));
  CHECK(loss.flat_grad().segment(cb_off, cb_len) == Vector::Zero(cb_len));

  loss.graph().backward(loss.term_node(3));
  CHECK(loss.flat_grad().segment(cb_off, cb_len) == Vector::Zero(cb_len));
}

TEST_CASE("both losses match central differences under replayed noise") {
  const ModelParams p = init_model(kSmall, 31);
  const Constellation cons = Constellation::qam(kSmall.codebook_size);
  RngStream data_rng(32);
  Vector image(kSmall.chw());
  for (int i = 0; i < kSmall.chw(); ++i) image[i] = data_rng.uniform();

  {
    ImageLossGraph loss(kSmall, &cons, 10.0, 1.0);
    loss.inputs().bind(loss.graph(), p);
    loss.graph().bind(loss.image_node(), Tensor::from_vector(image));
    double worst = 0.0;
    for (Graph::NodeId id : loss.inputs().all_ids())
      worst = std::max(worst,
                       grad_check(loss.graph(), loss.total_node(), id, 1e-4,
                                  RngStream(812)));
    CHECK(worst <= 1e-3);
  }
  {
    RowMatrix y1(kSmall.n_vectors, kSmall.feature_dim);
    for (Eigen::Index i = 0; i < y1.size(); ++i) y1(i / 2, i % 2) = data_rng.normal();
    FeatureLossGraph loss(kSmall, &cons, 10.0, 1.0);
    loss.inputs().bind(loss.graph(), p);
    loss.graph().bind(loss.y1_node(), Tensor::from_matrix(y1));
    double worst = 0.0;
    for (Graph::NodeId id : loss.inputs().all_ids())
      worst = std::max(worst,
                       grad_check(loss.graph(), loss.total_node(), id, 1e-4,
                                  RngStream(813)));
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("breakdown adds up and losses are non-negative") {
  const ModelParams p = init_model(kSmall, 41);
  const Constellation cons = Constellation::qam(kSmall.codebook_size);
  RngStream rng(42);
  Vector image(kSmall.chw());
  for (int i = 0; i < kSmall.chw(); ++i) image[i] = rng.uniform();

  ImageLossGraph loss(kSmall, &cons, 12.0, 0.7);
  for (int trial = 0; trial < 10; ++trial) {
    const LossBreakdown b = loss.eval(p, image, rng);
    CHECK(b.beta == 0.25 * b.alpha);
    CHECK(std::abs(b.total - (b.term1 + b.alpha * b.term2 + b.beta * b.term3)) <=
          1e-12);
    CHECK(b.term1 >= 0.0);
    CHECK(b.term2 >= 0.0);
    CHECK(b.term3 >= 0.0);
  }
}

TEST_CASE("psnr closed-form values") {
  const Vector x = Vector::Zero(16);
  CHECK(psnr(x, Vector::Constant(16, 0.1), 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(x, Vector::Constant(16, 1.0), 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(psnr(x, x, 1.0) == 99.0);
  CHECK_THROWS_AS(psnr(x, Vector::Zero(8), 1.0), Error);
  CHECK_THROWS_AS(psnr(x, x, 0.0), Error);
}
