#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedsfr/graph.hpp"
#include "fedsfr/losses.hpp"
#include "fedsfr/model.hpp"

using namespace fedsfr;

namespace {

Tensor vec1(double v) {
  Vector d(1);
  d[0] = v;
  return Tensor::from_vector(d);
}

}  // namespace

TEST_CASE("forward: mse against zero squares a one-element vector") {
  Graph g;
  const auto x = g.input({1}, "x");
  const auto zero = g.input({1}, "zero");
  const auto y = g.mse(x, zero);
  auto values = forward_eval(g, {{"x", vec1(3.0)}, {"zero", vec1(0.0)}}, nullptr);
  CHECK(values.at(y).data[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("forward: mse is the mean of squared differences") {
  Graph g;
  const auto a = g.input({2}, "a");
  const auto b = g.input({2}, "b");
  const auto m = g.mse(a, b);
  Vector av(2), bv(2);
  av << 1.0, 1.0;
  bv << 0.0, 0.0;
  g.bind(a, Tensor::from_vector(av));
  g.bind(b, Tensor::from_vector(bv));
  g.forward(nullptr);
  CHECK(g.value(m).data[0] == 1.0);
}

TEST_CASE("forward: stop-gradient is the identity") {
  Graph g;
  const auto x = g.input({1}, "x");
  const auto s = g.stop_gradient(x);
  g.bind(x, vec1(5.0));
  g.forward(nullptr);
  CHECK(g.value(s).data[0] == 5.0);
}

TEST_CASE("forward errors: unbound input and shape mismatch name the node") {
  Graph g;
  const auto x = g.input({2}, "x");
  CHECK_THROWS_WITH_AS(g.forward(nullptr), doctest::Contains("unbound input"),
                       Error);
  CHECK_THROWS_WITH_AS(g.bind(x, vec1(1.0)), doctest::Contains("x"), Error);
  const auto w = g.input({2, 3}, "w");
  CHECK_THROWS_WITH_AS(g.linear(w, x), doctest::Contains("w"), Error);
}

TEST_CASE("backward: d(x^2)/dx = 2x") {
  Graph g;
  const auto x = g.input({1}, "x");
  const auto zero = g.input({1}, "zero");
  const auto y = g.mse(x, zero);
  g.bind(x, vec1(3.0));
  g.bind(zero, vec1(0.0));
  g.forward(nullptr);
  g.backward(y);
  CHECK(g.grad(x).data[0] == 6.0);
}

TEST_CASE("backward: x * sg(x) differentiates only the live factor") {
  // The blocked factor enters as a 1x1 "weight"; its path contributes zero.
  Graph g;
  const auto x = g.input({1, 1}, "x");
  const auto blocked = g.stop_gradient(x);
  const auto y = g.linear(blocked, x);
  g.bind(x, Tensor({1, 1}, Vector::Constant(1, 3.0)));
  g.forward(nullptr);
  CHECK(g.value(y).data[0] == 9.0);
  g.backward(y);
  CHECK(g.grad(x).data[0] == 3.0);
}

TEST_CASE("backward: straight-through passes the upstream gradient to the original") {
  Graph g;
  const auto q = g.input({3}, "q");
  const auto y = g.input({3}, "y");
  const auto st = g.straight_through(q, y);
  const auto ones = g.input({1, 3}, "ones");
  const auto total = g.linear(ones, st);  // sum
  Vector qv(3), yv(3);
  qv << 7.0, -2.0, 0.5;
  yv << 1.0, 2.0, 3.0;
  g.bind(q, Tensor::from_vector(qv));
  g.bind(y, Tensor::from_vector(yv));
  g.bind(ones, Tensor({1, 3}, Vector::Ones(3)));
  g.forward(nullptr);
  CHECK(g.value(st).data == qv);  // forward takes the quantized side
  g.backward(total);
  CHECK(g.grad(y).data == Vector::Ones(3));
  CHECK(g.grad(q).data == Vector::Zero(3));
}

TEST_CASE("backward: seed must be scalar") {
  Graph g;
  const auto x = g.input({2}, "x");
  const auto s = g.scale(x, 2.0);
  Vector xv(2);
  xv << 1.0, 2.0;
  g.bind(x, Tensor::from_vector(xv));
  g.forward(nullptr);
  CHECK_THROWS_AS(g.backward(s), Error);
}

TEST_CASE("backward: everything reachable only through stop-gradient gets zero") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  Graph g;
  ModelGraphInputs in;
  const auto image = g.input({cfg.chw()}, "image");
  const auto features = build_encoder(g, cfg, in, image);
  const auto target = g.input({cfg.nd()}, "target");
  const auto loss = g.mse(g.stop_gradient(features), target);

  const ModelParams p = init_model(cfg, 7);
  in.bind(g, p);
  RngStream data_rng(99);
  g.bind(image, Tensor::from_vector(data_rng.normal_vector(cfg.chw())));
  g.bind(target, Tensor::from_vector(data_rng.normal_vector(cfg.nd())));
  g.forward(nullptr);
  g.backward(loss);
  for (std::size_t i = 0; i < in.enc_w.size(); ++i) {
    CHECK(g.grad(in.enc_w[i]).data == Vector::Zero(g.grad(in.enc_w[i]).data.size()));
    CHECK(g.grad(in.enc_b[i]).data == Vector::Zero(g.grad(in.enc_b[i]).data.size()));
  }
  CHECK(g.grad(image).data == Vector::Zero(cfg.chw()));
}

TEST_CASE("grad_check: quadratic graph is exact to roundoff") {
  Graph g;
  const auto w = g.input({2, 3}, "w");
  const auto x = g.input({3}, "x");
  const auto b = g.input({2}, "b");
  const auto target = g.input({2}, "target");
  const auto loss = g.mse(g.bias_add(g.linear(w, x), b), target);

  RngStream init(5);
  g.bind(w, Tensor({2, 3}, init.normal_vector(6)));
  g.bind(x, Tensor::from_vector(init.normal_vector(3)));
  g.bind(b, Tensor::from_vector(init.normal_vector(2)));
  g.bind(target, Tensor::from_vector(init.normal_vector(2)));
  const RngStream snapshot(0);
  CHECK(grad_check(g, loss, w, 1e-4, snapshot) <= 1e-6);
  CHECK(grad_check(g, loss, b, 1e-4, snapshot) <= 1e-6);
}

TEST_CASE("grad_check: full image loss matches central differences") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const Constellation cons = Constellation::qam(cfg.codebook_size);
  ImageLossGraph loss(cfg, &cons, 12.0, 1.0);

  const ModelParams p = init_model(cfg, 21);
  RngStream data_rng(77);
  Vector image(cfg.chw());
  for (int i = 0; i < cfg.chw(); ++i) image[i] = data_rng.uniform();

  loss.inputs().bind(loss.graph(), p);
  loss.graph().bind(loss.image_node(), Tensor::from_vector(image));
  const RngStream noise(4242);
  double worst = 0.0;
  for (Graph::NodeId id : loss.inputs().all_ids())
    worst = std::max(worst, grad_check(loss.graph(), loss.total_node(), id, 1e-4, noise));
  CHECK(worst <= 1e-3);
}

TEST_CASE("grad_check: graphs with stop-gradient check out on the detached surrogate") {
  Graph g;
  const auto w = g.input({2, 2}, "w");
  const auto x = g.input({2}, "x");
  const auto h = g.leaky_relu(g.linear(w, x), 0.2);
  const auto loss = g.mse(h, g.stop_gradient(g.scale(h, 0.5)));

  RngStream init(11);
  g.bind(w, Tensor({2, 2}, init.normal_vector(4)));
  g.bind(x, Tensor::from_vector(init.normal_vector(2)));
  CHECK(grad_check(g, loss, w, 1e-4, RngStream(0)) <= 1e-3);
}

TEST_CASE("grad_check: exact quantizer tie raises a non-differentiable-point error") {
  const ModelConfig cfg{1, 2, 2, 2, 2, {}, 4};
  const Constellation cons = Constellation::qam(4);
  ImageLossGraph loss(cfg, &cons, 1000.0, 1.0);

  ModelParams p = init_model(cfg, 3);
  p.codebook.row(1) = p.codebook.row(0);  // two equidistant codewords
  Vector image = Vector::Constant(cfg.chw(), 0.25);
  loss.inputs().bind(loss.graph(), p);
  loss.graph().bind(loss.image_node(), Tensor::from_vector(image));
  CHECK_THROWS_AS(
      grad_check(loss.graph(), loss.total_node(), loss.inputs().codebook, 1e-4,
                 RngStream(1)),
      NonDifferentiablePoint);
}

TEST_CASE("determinism: same bindings and stream give bitwise-equal evaluations") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const Constellation cons = Constellation::qam(cfg.codebook_size);
  ImageLossGraph loss(cfg, &cons, 8.0, 1.0);
  const ModelParams p = init_model(cfg, 13);
  RngStream data_rng(55);
  Vector image(cfg.chw());
  for (int i = 0; i < cfg.chw(); ++i) image[i] = data_rng.uniform();

  RngStream a(1234), b(1234);
  auto [la, ga] = loss.eval_grad(p, image, a);
  auto [lb, gb] = loss.eval_grad(p, image, b);
  CHECK(la.total == lb.total);
  CHECK(ga == gb);
}
