#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedsfr/model.hpp"
#include "fedsfr/privacy.hpp"

using namespace fedsfr;

TEST_CASE("laplace noise: zero scale, replay, and moments") {
  RngStream rng(1);
  CHECK(laplace_noise(0.0, 4, rng) == Vector::Zero(4));

  RngStream a(2), b(2);
  CHECK(laplace_noise(1.5, 8, a) == laplace_noise(1.5, 8, b));

  const double scale = 0.7;
  const int n = 100000;
  RngStream rng2(3);
  const Vector x = laplace_noise(scale, n, rng2);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / n;
  // Laplace moments: variance 2b^2, fourth moment 24b^4.
  const double mean_se = std::sqrt(2.0 * scale * scale / n);
  CHECK(std::abs(mean) <= 3 * mean_se);
  const double var_se = std::sqrt(20.0 * std::pow(scale, 4) / n);
  CHECK(std::abs(var - 2.0 * scale * scale) <= 3 * var_se);
}

TEST_CASE("l1 clipping") {
  Vector g(2);
  g << 1.0, 1.0;
  CHECK(clip_l1(g, 3.0) == g);
  Vector big(2);
  big << 2.0, 2.0;
  const Vector c = clip_l1(big, 2.0);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(1.0).epsilon(1e-15));

  RngStream rng(4);
  for (int t = 0; t < 50; ++t) {
    const Vector v = rng.normal_vector(16);
    CHECK(clip_l1(v, 0.5).lpNorm<1>() <= 0.5 + 1e-12);
  }
}

TEST_CASE("noisy index selection degenerates and saturates correctly") {
  Vector v(5);
  v << 0.1, -3.0, 0.2, 2.0, -0.5;
  RngStream rng(5);
  CHECK(oneshot_select(v, 2, 0.0, rng) == std::vector<int>{1, 3});
  CHECK(oneshot_select(v, 5, 2.0, rng) == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("noisy selection still prefers the dominant coordinate") {
  const int dim = 16;
  Vector v = Vector::Constant(dim, 0.05);
  v[7] = 1.0;
  RngStream rng(6);
  const int trials = 4000;
  int hits = 0;
  for (int t = 0; t < trials; ++t)
    if (oneshot_select(v, 1, 0.5, rng)[0] == 7) ++hits;
  const double freq = static_cast<double>(hits) / trials;
  CHECK(freq > 1.0 / dim);
}

TEST_CASE("privatized update reduces to plain top-k when disabled") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const LayerMap map = layer_map(cfg);
  RngStream data_rng(7);
  const Vector g = data_rng.normal_vector(map.dim);

  DpConfig dp;  // disabled, no clipping
  RngStream rng(8);
  const CompressedUpdate u = privatize_update(g, map, 0.25, dp, rng);
  const std::vector<int> mask = top_s_sparsify(g, map, 0.25);
  Vector expected = Vector::Zero(map.dim);
  for (int idx : mask) expected[idx] = g[idx];
  CHECK(u.dense(map) == expected);

  // With a binding clip bound the result is the top-k of the clipped vector.
  dp.clip_q = 0.5 * g.lpNorm<1>();
  RngStream rng2(8);
  const CompressedUpdate uc = privatize_update(g, map, 0.25, dp, rng2);
  const Vector clipped = clip_l1(g, dp.clip_q);
  Vector expected_clipped = Vector::Zero(map.dim);
  for (int idx : top_s_sparsify(clipped, map, 0.25)) expected_clipped[idx] = clipped[idx];
  CHECK(uc.dense(map) == expected_clipped);
}

TEST_CASE("privatized update: kept counts and value-noise variance") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const LayerMap map = layer_map(cfg);
  RngStream data_rng(9);
  const Vector g = data_rng.normal_vector(map.dim);

  DpConfig dp;
  dp.enabled = true;
  dp.sigma1 = 0.05;
  dp.sigma2 = 0.4;
  dp.clip_q = 1e9;  // slack, so value noise is the only distortion

  int expected_kept = 0;
  for (const LayerSpan& s : map.spans)
    expected_kept += static_cast<int>(std::ceil(0.25 * s.length));

  RngStream rng(10);
  const int trials = 4000;
  double acc = 0.0;
  int count = 0;
  for (int t = 0; t < trials; ++t) {
    const CompressedUpdate u = privatize_update(g, map, 0.25, dp, rng);
    CHECK(u.total_kept == expected_kept);
    for (const LayerUpdate& layer : u.layers) {
      const LayerSpan* span = nullptr;
      for (const LayerSpan& s : map.spans)
        if (s.name == layer.name) span = &s;
      for (std::size_t i = 0; i < layer.indices.size(); ++i) {
        const double noise =
            layer.values[static_cast<Eigen::Index>(i)] -
            g[span->offset + layer.indices[i]];
        acc += noise * noise;
        ++count;
      }
    }
  }
  const double var = acc / count;
  const double expected_var = 2.0 * dp.sigma2 * dp.sigma2;
  const double se = expected_var * std::sqrt(20.0 / 4.0) / std::sqrt(double(count));
  CHECK(std::abs(var - expected_var) <= 3 * se);
}

TEST_CASE("encoder privatization covers exactly the encoder prefix") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const LayerMap map = layer_map(cfg);
  CHECK(map.theta_len == map.phi_len);

  RngStream data_rng(11);
  const Vector g_theta = data_rng.normal_vector(map.theta_len);
  DpConfig dp;  // disabled
  RngStream rng(12);
  const CompressedUpdate u = privatize_encoder(g_theta, 0.5, dp, rng);
  CHECK(u.total_kept == static_cast<int>(std::ceil(0.5 * map.theta_len)));
  for (int idx : u.layers[0].indices) CHECK(idx < map.theta_len);

  LayerMap theta_map;
  theta_map.spans.push_back({"theta", 0, map.theta_len});
  theta_map.dim = map.theta_len;
  const Vector dense = u.dense(theta_map);
  CHECK(dense.size() == map.theta_len);
  Vector expected = Vector::Zero(map.theta_len);
  for (int idx : top_k_indices(g_theta, u.total_kept)) expected[idx] = g_theta[idx];
  CHECK(dense == expected);
}

TEST_CASE("features depend on the data only through privatized parameters") {
  const ModelConfig cfg{1, 4, 4, 4, 2, {8}, 4};
  const ModelParams p = init_model(cfg, 13);
  RngStream img_rng(14);
  Vector image(cfg.chw());
  for (int i = 0; i < cfg.chw(); ++i) image[i] = img_rng.uniform();
  // Same privatized parameters, same public image: the features agree
  // bitwise, no residual dependence on anything else.
  CHECK(encode(cfg, p, image) == encode(cfg, p, image));
}

TEST_CASE("privacy budget closed forms and exact halving") {
  CHECK(epsilon_budget(DpOption::kModelUpload, 2, 1.0, 10, 1.0, 1.0) ==
        doctest::Approx(1.2).epsilon(1e-15));
  CHECK(epsilon_budget(DpOption::kFeatureUpload, 2, 1.0, 10, 1.0, 1.0) ==
        doctest::Approx(0.6).epsilon(1e-15));

  RngStream rng(15);
  for (int t = 0; t < 100; ++t) {
    const int kept = 1 + rng.uniform_int(500);
    const double q = rng.uniform(0.01, 10.0);
    const int dim = kept + rng.uniform_int(5000);
    const double s1 = rng.uniform(0.001, 5.0);
    const double s2 = rng.uniform(0.001, 5.0);
    const double model = epsilon_budget(DpOption::kModelUpload, kept, q, dim, s1, s2);
    const double feat = epsilon_budget(DpOption::kFeatureUpload, kept, q, dim, s1, s2);
    CHECK(feat == model / 2.0);
  }

  // Round budgets compose additively.
  const double per_round = epsilon_budget(DpOption::kModelUpload, 3, 1.0, 50, 0.1, 0.2);
  double total = 0.0;
  for (int t = 0; t < 7; ++t) total += per_round;
  CHECK(total == doctest::Approx(7 * per_round).epsilon(1e-15));
}
