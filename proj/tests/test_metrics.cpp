#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "fedsfr/metrics.hpp"

using namespace fedsfr;
using nlohmann::json;

namespace {

MetricsRow sample_row() {
  MetricsRow r;
  r.t = 3;
  r.psnr_db = 11.25;
  r.loss_mean = 0.125;
  r.fr_improved = true;
  r.eps_ratio_assumption1 = 0.9;
  r.nu_hat = 0.6;
  r.eps_cumulative = 1.5;
  return r;
}

}  // namespace

TEST_CASE("jsonl rows carry exactly the published keys") {
  MetricsTrace trace;
  trace.rows.push_back(sample_row());
  const json plain = json::parse(to_jsonl(trace));
  CHECK(plain.size() == 7);
  for (const char* key : {"t", "psnr_db", "loss_mean", "fr_improved",
                          "eps_ratio_assumption1", "nu_hat", "eps_cumulative"})
    CHECK(plain.contains(key));

  MetricsRow dp = sample_row();
  dp.dp_enabled = true;
  dp.eps_model_upload = 0.25;
  dp.eps_feature_upload = 0.125;
  trace.rows[0] = dp;
  const json with_dp = json::parse(to_jsonl(trace));
  CHECK(with_dp.size() == 9);
  CHECK(with_dp.contains("eps_model_upload"));
  CHECK(with_dp.contains("eps_feature_upload"));
}

TEST_CASE("csv mirror: fixed header, one line per record") {
  MetricsTrace trace;
  trace.rows.push_back(sample_row());
  trace.rows.push_back(sample_row());
  const std::string csv = to_csv(trace);
  CHECK(csv.rfind("t,psnr_db,loss_mean,fr_improved,eps_ratio_assumption1,nu_hat,"
                  "eps_cumulative,eps_model_upload,eps_feature_upload\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("values round-trip through the jsonl encoding") {
  MetricsTrace trace;
  MetricsRow r = sample_row();
  r.psnr_db = 10.123456789012345;  // shortest-roundtrip serialization
  trace.rows.push_back(r);
  const json j = json::parse(to_jsonl(trace));
  CHECK(j["psnr_db"].get<double>() == r.psnr_db);
  CHECK(j["fr_improved"].get<bool>() == true);
  CHECK(j["t"].get<int>() == 3);
}
