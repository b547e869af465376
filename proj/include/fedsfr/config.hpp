#pragma once

#include <string>
#include <vector>

#include "fedsfr/data.hpp"
#include "fedsfr/model.hpp"
#include "fedsfr/privacy.hpp"

namespace fedsfr {

enum class WeightScheme { kFedAvg, kFedDma, kFedLol };
enum class RunMode { kFedSfr, kBaseline };

WeightScheme weight_scheme_from_string(const std::string& s);
RunMode run_mode_from_string(const std::string& s);
std::string to_string(WeightScheme s);
std::string to_string(RunMode m);

struct DataSpec {
  std::string kind = "gaussians";  // gradients | gaussians | checker | raw
  int n = 0;                       // synthetic image count
  std::string path;                // raw file path (kind == raw only)
  std::string partition = "iid-equal";
  double public_fraction = 0.5;
};

struct ExperimentConfig {
  ModelConfig model;
  int clients = 0;          // K
  int model_uploaders = 0;  // K_m
  int feature_uploaders = 0;  // K_o
  double model_fraction = 0.2;    // per-layer kept fraction for model uplinks
  double feature_fraction = 0.1;  // kept fraction for encoder-side privatization
  int qsgd_bits = 4;
  int feature_bits = 4;
  int feature_count_per_client = 8;
  int local_steps = 3;   // E_c
  int server_steps = 3;  // E_s
  int rounds = 30;       // T
  int batch_size = 16;
  double eta_c0 = 0.01;
  double eta_s0 = 0.0001;
  double decay_factor = 0.9;
  int decay_interval = 10;
  double snr_db = 20.0;
  double alpha_c = 1.0;
  double alpha_s = 1.0;
  WeightScheme scheme = WeightScheme::kFedAvg;
  RunMode mode = RunMode::kFedSfr;
  DpConfig dp;
  std::uint64_t seed = 1;
  DataSpec data;
  int eval_count = 16;

  /// Hard validation errors throw; soft issues (like a server rate at or
  /// above the client rate) are returned as warnings.
  std::vector<std::string> validate() const;
};

/// Strict JSON parsing: every field above is required, unknown fields are
/// rejected, and errors name the offending field.
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig parse_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace fedsfr
