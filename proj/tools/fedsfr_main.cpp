#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsfr/analysis.hpp"
#include "fedsfr/compression.hpp"
#include "fedsfr/federation.hpp"
#include "fedsfr/losses.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct RunSummary {
  std::string name;
  double final5_psnr = 0.0;
  double last15_psnr_sd = 0.0;
  double improvement = 0.0;
  double final_loss = 0.0;
  double eps_cumulative = 0.0;
};

double mean_tail_psnr(const fedsfr::MetricsTrace& trace, int tail) {
  const int n = static_cast<int>(trace.rows.size());
  const int count = std::min(tail, n);
  double acc = 0.0;
  for (int i = n - count; i < n; ++i) acc += trace.rows[static_cast<std::size_t>(i)].psnr_db;
  return count > 0 ? acc / count : 0.0;
}

double sd_tail_psnr(const fedsfr::MetricsTrace& trace, int tail) {
  const int n = static_cast<int>(trace.rows.size());
  const int count = std::min(tail, n);
  if (count < 2) return 0.0;
  double mean = 0.0;
  for (int i = n - count; i < n; ++i) mean += trace.rows[static_cast<std::size_t>(i)].psnr_db;
  mean /= count;
  double acc = 0.0;
  for (int i = n - count; i < n; ++i) {
    const double d = trace.rows[static_cast<std::size_t>(i)].psnr_db - mean;
    acc += d * d;
  }
  return std::sqrt(acc / (count - 1));
}

RunSummary summarize(const std::string& name, const fedsfr::MetricsTrace& trace) {
  RunSummary s;
  s.name = name;
  s.final5_psnr = mean_tail_psnr(trace, 5);
  s.last15_psnr_sd = sd_tail_psnr(trace, 15);
  s.improvement = trace.improvement_fraction();
  if (!trace.rows.empty()) {
    s.final_loss = trace.rows.back().loss_mean;
    s.eps_cumulative = trace.rows.back().eps_cumulative;
  }
  return s;
}

fedsfr::ExperimentConfig load_config_or_exit(const std::string& path) {
  fedsfr::ExperimentConfig cfg = fedsfr::parse_config(path);
  for (const std::string& warning : cfg.validate())
    std::cerr << "warning: " << warning << "\n";
  return cfg;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads) {
  const fedsfr::ExperimentConfig cfg = load_config_or_exit(config_path);
  fedsfr::Experiment exp(cfg);
  const fedsfr::MetricsTrace trace = exp.run(threads);
  fedsfr::write_metrics_files(out_dir, trace);
  fedsfr::save_checkpoint(out_dir + "/model.fsfr", cfg.model, exp.model());
  const RunSummary s = summarize(config_path, trace);
  std::printf("rounds=%d final5_psnr=%.3f last15_sd=%.3f improvement=%.3f\n",
              cfg.rounds, s.final5_psnr, s.last15_psnr_sd, s.improvement);
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::string& out_dir, int threads) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/summary.csv");
  csv << "config,final5_psnr,last15_psnr_sd,improvement_ratio,final_loss,"
         "eps_cumulative\n";
  std::printf("%-32s %12s %12s %12s %12s\n", "config", "final5_psnr", "last15_sd",
              "improve", "final_loss");
  for (const std::string& path : config_paths) {
    const fedsfr::ExperimentConfig cfg = load_config_or_exit(path);
    fedsfr::Experiment exp(cfg);
    const fedsfr::MetricsTrace trace = exp.run(threads);
    const RunSummary s = summarize(path, trace);
    csv << s.name << ',' << s.final5_psnr << ',' << s.last15_psnr_sd << ','
        << s.improvement << ',' << s.final_loss << ',' << s.eps_cumulative << '\n';
    std::printf("%-32s %12.4f %12.4f %12.4f %12.6f\n", path.c_str(), s.final5_psnr,
                s.last15_psnr_sd, s.improvement, s.final_loss);
  }
  return kExitOk;
}

int cmd_diag(const std::string& config_path, int threads) {
  const fedsfr::ExperimentConfig cfg = load_config_or_exit(config_path);
  const fedsfr::LayerMap map = fedsfr::layer_map(cfg.model);

  nlohmann::json out;
  {
    fedsfr::RngStream rng = fedsfr::derive_stream(cfg.seed, {0xD1A6});
    fedsfr::CompressorSpec spec{map, cfg.model_fraction, cfg.qsgd_bits};
    out["nu_hat_model_uplink"] = fedsfr::estimate_contraction(spec, 400, rng);
    fedsfr::CompressorSpec spec_o{map, cfg.feature_fraction, cfg.qsgd_bits};
    out["nu_hat_feature_fraction"] = fedsfr::estimate_contraction(spec_o, 400, rng);
  }

  fedsfr::Experiment exp(cfg);
  const fedsfr::MetricsTrace trace = exp.run(threads);

  double worst_mean_memory = 0.0;
  for (const auto& round : trace.memory_norm2) {
    double mean = 0.0;
    for (double m : round) mean += m;
    if (!round.empty()) mean /= static_cast<double>(round.size());
    worst_mean_memory = std::max(worst_mean_memory, mean);
  }
  out["memory_bound"] = fedsfr::error_memory_bound(
      std::max(trace.nu_hat_min, 1e-9), cfg.eta_c0, cfg.local_steps,
      trace.max_batch_grad_norm);
  out["memory_worst_mean_norm2"] = worst_mean_memory;
  out["nu_hat_min_observed"] = trace.nu_hat_min;
  out["max_batch_grad_norm"] = trace.max_batch_grad_norm;
  out["improvement_ratio"] = trace.improvement_fraction();

  {
    fedsfr::RngStream rng = fedsfr::derive_stream(cfg.seed, {0x5A6B});
    const fedsfr::SurrogateDiag diag = fedsfr::fr_surrogate_diag(
        cfg.model, exp.model(), exp.eval_images(), 0.01, 2000, rng);
    out["surrogate_mean_ratio"] = diag.mean_ratio;
    out["surrogate_correlation"] = diag.correlation;
    out["surrogate_degenerate"] = diag.degenerate;
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

bool nearly(double a, double b, double tol) { return std::abs(a - b) <= tol; }

int cmd_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", name);
    if (!ok) ++failures;
  };

  using namespace fedsfr;
  check("epsilon budget model upload",
        nearly(epsilon_budget(DpOption::kModelUpload, 2, 1.0, 10, 1.0, 1.0), 1.2, 1e-12));
  check("epsilon budget feature upload",
        nearly(epsilon_budget(DpOption::kFeatureUpload, 2, 1.0, 10, 1.0, 1.0), 0.6, 1e-12));
  check("epsilon halving",
        epsilon_budget(DpOption::kFeatureUpload, 3, 2.0, 50, 0.5, 0.25) ==
            epsilon_budget(DpOption::kModelUpload, 3, 2.0, 50, 0.5, 0.25) / 2.0);

  {
    const Vector w = aggregation_weights(WeightScheme::kFedAvg, {10, 30}, {});
    check("fedavg weights", nearly(w[0], 0.25, 1e-12) && nearly(w[1], 0.75, 1e-12));
  }
  {
    const Vector w = aggregation_weights(WeightScheme::kFedDma, {}, {1, 2, 3});
    check("softmax loss weights", nearly(w[0], 0.18632, 2e-5) &&
                                      nearly(w[1], 0.30719, 2e-5) &&
                                      nearly(w[2], 0.50648, 2e-5));
  }
  {
    const Vector w = aggregation_weights(WeightScheme::kFedLol, {}, {1, 2, 3});
    check("complementary loss weights",
          nearly(w[0], 5.0 / 12, 1e-12) && nearly(w[1], 4.0 / 12, 1e-12) &&
              nearly(w[2], 3.0 / 12, 1e-12));
  }
  check("memory bound value",
        nearly(error_memory_bound(0.5, 0.01, 3, 10.0), 0.72, 1e-12));
  check("psnr 20 dB", nearly(psnr(Vector::Zero(4), Vector::Constant(4, 0.1), 1.0),
                             20.0, 1e-9));
  {
    Vector x(2);
    x << 1.0, 2.0;
    check("psnr cap", psnr(x, x, 1.0) == 99.0);
  }
  {
    Vector g(2);
    g << 2.0, 2.0;
    const Vector c = clip_l1(g, 2.0);
    check("l1 clip", nearly(c[0], 1.0, 1e-12) && nearly(c[1], 1.0, 1e-12));
  }
  {
    RowMatrix y(1, 2);
    y << 0.0, 1.0;
    RowMatrix probe(1, 2);
    probe << 0.5, 0.5;  // force the batch range to [0, 1]
    RowMatrix batch(2, 2);
    batch << 0.0, 1.0, 0.5, 0.5;
    const ScalarQuantized q = uniform_scalar_quantize(batch, 4);
    check("scalar quantizer midpoint",
          q.levels[2] == 8 && nearly(q.dequantized(1, 0), 8.0 / 15.0, 1e-12));
  }
  {
    RowMatrix codebook(2, 2);
    codebook << 0.0, 0.0, 1.0, 1.0;
    RowMatrix y(1, 2);
    y << 0.5, 0.5;
    check("quantizer tie rule", vq_quantize(codebook, y)[0] == 0);
  }
  check("rate schedule",
        nearly(decayed_rate(0.01, 0.9, 10, 25), 0.0081, 1e-12));
  {
    Vector v(2);
    v << 1.0, 0.0;
    RngStream rng(1);
    const QsgdResult q = qsgd_quantize(v, 4, rng);
    check("on-grid quantizer is deterministic",
          q.levels == std::vector<std::int64_t>{15, 0} &&
              qsgd_dequantize(q, 4) == v);
  }
  {
    Vector a(2);
    a << 1.0, -2.0;
    check("alignment ratio endpoints",
          assumption1_ratio(a, a) == 0.0 &&
              assumption1_ratio(a, Vector::Zero(2)) == 1.0 &&
              nearly(assumption1_ratio(a, Vector(-a)), 2.0, 1e-12));
  }
  {
    Vector v(3);
    v << 3.0, -1.0, 2.0;
    Vector kept(1);
    kept << 3.0;
    check("top-k tie rule", top_k_indices(v, 1) == std::vector<int>{0});
    Vector g(3), g_bar(3);
    g << 3.0, -1.0, 2.0;
    g_bar << 3.0, 0.0, 0.0;
    Vector m = update_error_memory(g, g_bar);
    check("memory keeps the dropped residue",
          m[0] == 0.0 && m[1] == -1.0 && m[2] == 2.0);
  }
  {
    bool ordered = true;
    for (int horizon = 2; horizon <= 4096; horizon *= 2)
      ordered = ordered && server_rate_schedule(1.0, horizon) <
                               client_rate_schedule(1.0, horizon);
    check("server rate below client rate", ordered);
  }

  std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
  return failures == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training simulator for codebook-based image links"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> config_paths;
  int threads = 1;

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  run->add_option("--config", config_path, "config JSON")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--threads", threads, "client worker threads");

  CLI::App* compare = app.add_subcommand("compare", "run several configs");
  compare->add_option("--configs", config_paths, "config JSON files")->required();
  compare->add_option("--out", out_dir, "output directory");
  compare->add_option("--threads", threads, "client worker threads");

  CLI::App* diag = app.add_subcommand("diag", "run diagnostics only");
  diag->add_option("--config", config_path, "config JSON")->required();
  diag->add_option("--threads", threads, "client worker threads");

  app.add_subcommand("selftest", "check built-in analytic examples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, threads);
    if (compare->parsed()) return cmd_compare(config_paths, out_dir, threads);
    if (diag->parsed()) return cmd_diag(config_path, threads);
    return cmd_selftest();
  } catch (const fedsfr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    return what.rfind("config:", 0) == 0 ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
