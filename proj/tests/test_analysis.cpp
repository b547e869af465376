#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedsfr/analysis.hpp"
#include "fedsfr/data.hpp"

using namespace fedsfr;

TEST_CASE("alignment ratio endpoints and range") {
  Vector a(3);
  a << 1.0, -2.0, 0.5;
  CHECK(assumption1_ratio(a, a) == 0.0);
  CHECK(assumption1_ratio(a, Vector::Zero(3)) == 1.0);
  CHECK(assumption1_ratio(a, Vector(-a)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(assumption1_ratio(Vector::Zero(3), Vector::Zero(3)), Error);

  RngStream rng(1);
  for (int t = 0; t < 200; ++t) {
    const double r = assumption1_ratio(rng.normal_vector(8), rng.normal_vector(8));
    CHECK(r >= 0.0);
    CHECK(r <= 2.0);
  }
}

TEST_CASE("error-memory bound: closed form and monotonicity") {
  CHECK(error_memory_bound(1.0, 0.1, 5, 3.0) == 0.0);
  CHECK(error_memory_bound(0.5, 0.01, 3, 10.0) == doctest::Approx(0.72).epsilon(1e-15));
  double prev = std::numeric_limits<double>::infinity();
  for (double nu : {0.1, 0.25, 0.5, 0.75, 1.0}) {
    const double b = error_memory_bound(nu, 0.01, 3, 10.0);
    CHECK(b <= prev);
    prev = b;
  }
  CHECK_THROWS_AS(error_memory_bound(0.0, 0.01, 3, 10.0), Error);
}

TEST_CASE("surrogate probe: zero perturbation reports degeneracy") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const ModelParams p = init_model(cfg, 2);
  const Dataset d = generate_synthetic(4, 1, 4, 4, SyntheticKind::kGaussians, 3);
  RngStream rng(4);
  const SurrogateDiag diag = fr_surrogate_diag(cfg, p, d.images, 0.0, 100, rng);
  CHECK(diag.degenerate);
}

TEST_CASE("surrogate probe: white linear encoder concentrates at the feature count") {
  // Direct linear encoder whose weights are i.i.d. standard normal: feature
  // discrepancy inflates image discrepancy by the output dimension.
  const ModelConfig cfg{1, 8, 8, 16, 4, {}, 4};  // chw 64, nd 64
  ModelParams p = init_model(cfg, 5);
  RngStream wrng(6);
  for (Eigen::Index r = 0; r < p.enc_w[0].rows(); ++r)
    for (Eigen::Index c = 0; c < p.enc_w[0].cols(); ++c)
      p.enc_w[0](r, c) = wrng.normal();
  p.enc_b[0].setZero();

  const Dataset d = generate_synthetic(8, 1, 8, 8, SyntheticKind::kGaussians, 7);
  RngStream rng(8);
  const SurrogateDiag diag = fr_surrogate_diag(cfg, p, d.images, 0.01, 10000, rng);
  CHECK(!diag.degenerate);
  const double nd = cfg.nd();
  CHECK(std::abs(diag.mean_ratio - nd) / nd <= 0.10);
}

TEST_CASE("surrogate probe: desk model correlates positively") {
  const ModelConfig cfg{1, 8, 8, 16, 2, {32}, 16};
  const ModelParams p = init_model(cfg, 9);
  const Dataset d = generate_synthetic(8, 1, 8, 8, SyntheticKind::kGaussians, 10);
  RngStream rng(11);
  const SurrogateDiag diag = fr_surrogate_diag(cfg, p, d.images, 0.01, 2000, rng);
  CHECK(diag.correlation > 0.0);
}

TEST_CASE("improvement ratio counts strict decreases") {
  CHECK(improvement_ratio({{1.0, 0.5}, {2.0, 1.0}}) == 1.0);
  CHECK(improvement_ratio({{1.0, 1.5}, {2.0, 2.0}}) == 0.0);
  CHECK(improvement_ratio({{1.0, 0.5}, {1.0, 2.0}, {3.0, 2.0}, {1.0, 1.0}}) == 0.5);
  CHECK(improvement_ratio({}) == 0.0);
}

TEST_CASE("rate schedules keep the server strictly below the clients") {
  for (int horizon = 2; horizon <= 1 << 20; horizon *= 2) {
    double alpha = 1.0;
    for (int t = 0; t < 4; ++t) {
      CHECK(server_rate_schedule(alpha, horizon) < client_rate_schedule(alpha, horizon));
      alpha *= 0.9;
    }
  }
}
