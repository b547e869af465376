#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fedsfr {

/// One emitted record. t == 0 is the pre-training evaluation; round r writes
/// record t == r + 1.
struct MetricsRow {
  int t = 0;
  double psnr_db = 0.0;
  double loss_mean = 0.0;
  bool fr_improved = false;
  double eps_ratio_assumption1 = 0.0;
  double nu_hat = 0.0;
  double eps_cumulative = 0.0;
  bool dp_enabled = false;
  double eps_model_upload = 0.0;
  double eps_feature_upload = 0.0;
};

struct MetricsTrace {
  std::vector<MetricsRow> rows;

  // In-memory diagnostics, one entry per executed round. Not serialized.
  std::vector<double> grad_probe_norm2;
  std::vector<std::vector<double>> memory_norm2;        // per client
  std::vector<std::pair<double, double>> fr_loss_pairs;  // probe loss before/after
  double nu_hat_min = 1.0;       // most pessimistic observed contraction
  double max_batch_grad_norm = 0.0;

  double improvement_fraction() const;
};

std::string to_jsonl(const MetricsTrace& trace);
std::string to_csv(const MetricsTrace& trace);
void write_metrics_files(const std::string& out_dir, const MetricsTrace& trace);

}  // namespace fedsfr
