#include "fedsfr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fedsfr {

using nlohmann::json;

WeightScheme weight_scheme_from_string(const std::string& s) {
  if (s == "fedavg") return WeightScheme::kFedAvg;
  if (s == "feddma") return WeightScheme::kFedDma;
  if (s == "fedlol") return WeightScheme::kFedLol;
  throw Error("unknown scheme '" + s + "'");
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "fedsfr") return RunMode::kFedSfr;
  if (s == "baseline") return RunMode::kBaseline;
  throw Error("unknown mode '" + s + "'");
}

std::string to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::kFedAvg: return "fedavg";
    case WeightScheme::kFedDma: return "feddma";
    case WeightScheme::kFedLol: return "fedlol";
  }
  return "?";
}

std::string to_string(RunMode m) {
  return m == RunMode::kFedSfr ? "fedsfr" : "baseline";
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::string& scope) {
  if (!obj.is_object()) throw Error("config: " + scope + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw Error("config: unknown field " + scope + key);
  for (const std::string& key : allowed)
    if (!obj.contains(key)) throw Error("config: missing field " + scope + key);
}

template <typename T>
T field(const json& obj, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config: field " + key + " has the wrong type");
  }
}

}  // namespace

std::vector<std::string> ExperimentConfig::validate() const {
  model.validate();
  dp.validate();
  if (clients < 1) throw Error("config: K must be >= 1");
  if (model_uploaders < 1) throw Error("config: K_m must be >= 1");
  if (feature_uploaders < 0) throw Error("config: K_o must be >= 0");
  if (model_uploaders + feature_uploaders > clients)
    throw Error("config: K_m + K_o must not exceed K");
  if (!(model_fraction > 0.0 && model_fraction <= 1.0))
    throw Error("config: S_m_fraction must be in (0, 1]");
  if (!(feature_fraction > 0.0 && feature_fraction <= 1.0))
    throw Error("config: S_o_fraction must be in (0, 1]");
  if (qsgd_bits < 1 || qsgd_bits > 52)
    throw Error("config: qsgd_bits must be in [1, 52]");
  if (feature_bits < 1 || feature_bits > 52)
    throw Error("config: feature_bits must be in [1, 52]");
  if (feature_count_per_client < 1)
    throw Error("config: feature_count_per_client must be >= 1");
  if (local_steps < 0 || server_steps < 0 || rounds < 0)
    throw Error("config: E_c, E_s, and T must be non-negative");
  if (batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (eta_c0 < 0.0 || eta_s0 < 0.0)
    throw Error("config: learning rates must be non-negative");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0))
    throw Error("config: decay_factor must be in (0, 1]");
  if (decay_interval < 1) throw Error("config: decay_interval must be >= 1");
  if (alpha_c < 0.0 || alpha_s < 0.0)
    throw Error("config: alpha weights must be non-negative");
  if (eval_count < 0) throw Error("config: eval_count must be >= 0");
  if (data.kind == "raw") {
    if (data.path.empty()) throw Error("config: data.path required for raw data");
  } else {
    synthetic_kind_from_string(data.kind);
    if (data.n < 0) throw Error("config: data.n must be >= 0");
  }
  partition_scheme_from_string(data.partition);
  if (!(data.public_fraction > 0.0 && data.public_fraction <= 1.0))
    throw Error("config: data.public_fraction must be in (0, 1]");

  std::vector<std::string> warnings;
  if (mode == RunMode::kFedSfr && eta_s0 >= eta_c0 && eta_c0 > 0.0)
    warnings.push_back(
        "server rate eta_s0 is not below client rate eta_c0; refinement may "
        "dominate training");
  return warnings;
}

ExperimentConfig parse_config_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }

  require_keys(j, {"model", "K", "K_m", "K_o", "S_m_fraction", "S_o_fraction",
                   "qsgd_bits", "feature_bits", "feature_count_per_client", "E_c",
                   "E_s", "T", "batch_size", "eta_c0", "eta_s0", "decay_factor",
                   "decay_interval", "snr_db", "alpha_c", "alpha_s", "scheme",
                   "mode", "dp", "seed", "data", "eval_count"},
               "");

  ExperimentConfig cfg;
  const json& jm = j.at("model");
  require_keys(jm, {"C", "H", "W", "N", "d", "M", "hidden_widths"}, "model.");
  cfg.model.channels = field<int>(jm, "C");
  cfg.model.height = field<int>(jm, "H");
  cfg.model.width = field<int>(jm, "W");
  cfg.model.n_vectors = field<int>(jm, "N");
  cfg.model.feature_dim = field<int>(jm, "d");
  cfg.model.codebook_size = field<int>(jm, "M");
  cfg.model.hidden = field<std::vector<int>>(jm, "hidden_widths");

  cfg.clients = field<int>(j, "K");
  cfg.model_uploaders = field<int>(j, "K_m");
  cfg.feature_uploaders = field<int>(j, "K_o");
  cfg.model_fraction = field<double>(j, "S_m_fraction");
  cfg.feature_fraction = field<double>(j, "S_o_fraction");
  cfg.qsgd_bits = field<int>(j, "qsgd_bits");
  cfg.feature_bits = field<int>(j, "feature_bits");
  cfg.feature_count_per_client = field<int>(j, "feature_count_per_client");
  cfg.local_steps = field<int>(j, "E_c");
  cfg.server_steps = field<int>(j, "E_s");
  cfg.rounds = field<int>(j, "T");
  cfg.batch_size = field<int>(j, "batch_size");
  cfg.eta_c0 = field<double>(j, "eta_c0");
  cfg.eta_s0 = field<double>(j, "eta_s0");
  cfg.decay_factor = field<double>(j, "decay_factor");
  cfg.decay_interval = field<int>(j, "decay_interval");
  cfg.snr_db = field<double>(j, "snr_db");
  cfg.alpha_c = field<double>(j, "alpha_c");
  cfg.alpha_s = field<double>(j, "alpha_s");
  cfg.scheme = weight_scheme_from_string(field<std::string>(j, "scheme"));
  cfg.mode = run_mode_from_string(field<std::string>(j, "mode"));

  const json& jd = j.at("dp");
  require_keys(jd, {"enabled", "sigma1", "sigma2", "clip_q"}, "dp.");
  cfg.dp.enabled = field<bool>(jd, "enabled");
  cfg.dp.sigma1 = field<double>(jd, "sigma1");
  cfg.dp.sigma2 = field<double>(jd, "sigma2");
  cfg.dp.clip_q = field<double>(jd, "clip_q");

  cfg.seed = field<std::uint64_t>(j, "seed");

  const json& jdata = j.at("data");
  if (!jdata.is_object()) throw Error("config: data must be an object");
  const bool raw = jdata.contains("kind") && jdata.at("kind") == "raw";
  if (raw)
    require_keys(jdata, {"kind", "path", "partition", "public_fraction"}, "data.");
  else
    require_keys(jdata, {"kind", "n", "partition", "public_fraction"}, "data.");
  cfg.data.kind = field<std::string>(jdata, "kind");
  if (raw)
    cfg.data.path = field<std::string>(jdata, "path");
  else
    cfg.data.n = field<int>(jdata, "n");
  cfg.data.partition = field<std::string>(jdata, "partition");
  cfg.data.public_fraction = field<double>(jdata, "public_fraction");

  cfg.eval_count = field<int>(j, "eval_count");
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("config: cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_string(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  json j;
  j["model"] = {{"C", cfg.model.channels},      {"H", cfg.model.height},
                {"W", cfg.model.width},         {"N", cfg.model.n_vectors},
                {"d", cfg.model.feature_dim},   {"M", cfg.model.codebook_size},
                {"hidden_widths", cfg.model.hidden}};
  j["K"] = cfg.clients;
  j["K_m"] = cfg.model_uploaders;
  j["K_o"] = cfg.feature_uploaders;
  j["S_m_fraction"] = cfg.model_fraction;
  j["S_o_fraction"] = cfg.feature_fraction;
  j["qsgd_bits"] = cfg.qsgd_bits;
  j["feature_bits"] = cfg.feature_bits;
  j["feature_count_per_client"] = cfg.feature_count_per_client;
  j["E_c"] = cfg.local_steps;
  j["E_s"] = cfg.server_steps;
  j["T"] = cfg.rounds;
  j["batch_size"] = cfg.batch_size;
  j["eta_c0"] = cfg.eta_c0;
  j["eta_s0"] = cfg.eta_s0;
  j["decay_factor"] = cfg.decay_factor;
  j["decay_interval"] = cfg.decay_interval;
  j["snr_db"] = cfg.snr_db;
  j["alpha_c"] = cfg.alpha_c;
  j["alpha_s"] = cfg.alpha_s;
  j["scheme"] = to_string(cfg.scheme);
  j["mode"] = to_string(cfg.mode);
  j["dp"] = {{"enabled", cfg.dp.enabled},
             {"sigma1", cfg.dp.sigma1},
             {"sigma2", cfg.dp.sigma2},
             {"clip_q", cfg.dp.clip_q}};
  j["seed"] = cfg.seed;
  if (cfg.data.kind == "raw")
    j["data"] = {{"kind", cfg.data.kind},
                 {"path", cfg.data.path},
                 {"partition", cfg.data.partition},
                 {"public_fraction", cfg.data.public_fraction}};
  else
    j["data"] = {{"kind", cfg.data.kind},
                 {"n", cfg.data.n},
                 {"partition", cfg.data.partition},
                 {"public_fraction", cfg.data.public_fraction}};
  j["eval_count"] = cfg.eval_count;
  return j.dump(2);
}

}  // namespace fedsfr
