#include "fedsfr/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedsfr/analysis.hpp"
#include "fedsfr/tensor.hpp"

namespace fedsfr {

using nlohmann::json;

double MetricsTrace::improvement_fraction() const {
  return improvement_ratio(fr_loss_pairs);
}

std::string to_jsonl(const MetricsTrace& trace) {
  std::string out;
  for (const MetricsRow& r : trace.rows) {
    json j;
    j["t"] = r.t;
    j["psnr_db"] = r.psnr_db;
    j["loss_mean"] = r.loss_mean;
    j["fr_improved"] = r.fr_improved;
    j["eps_ratio_assumption1"] = r.eps_ratio_assumption1;
    j["nu_hat"] = r.nu_hat;
    j["eps_cumulative"] = r.eps_cumulative;
    if (r.dp_enabled) {
      j["eps_model_upload"] = r.eps_model_upload;
      j["eps_feature_upload"] = r.eps_feature_upload;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const MetricsTrace& trace) {
  std::string out =
      "t,psnr_db,loss_mean,fr_improved,eps_ratio_assumption1,nu_hat,"
      "eps_cumulative,eps_model_upload,eps_feature_upload\n";
  for (const MetricsRow& r : trace.rows) {
    out += std::to_string(r.t) + ',' + fmt(r.psnr_db) + ',' + fmt(r.loss_mean) +
           ',' + (r.fr_improved ? "1" : "0") + ',' +
           fmt(r.eps_ratio_assumption1) + ',' + fmt(r.nu_hat) + ',' +
           fmt(r.eps_cumulative) + ',' + fmt(r.eps_model_upload) + ',' +
           fmt(r.eps_feature_upload) + '\n';
  }
  return out;
}

void write_metrics_files(const std::string& out_dir, const MetricsTrace& trace) {
  std::filesystem::create_directories(out_dir);
  const auto dump = [](const std::string& path, const std::string& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("metrics: cannot open " + path + " for writing");
    os << body;
  };
  dump(out_dir + "/metrics.jsonl", to_jsonl(trace));
  dump(out_dir + "/metrics.csv", to_csv(trace));
}

}  // namespace fedsfr
