#include <cmath>
#include <cstdio>
#include <set>

#include "cibhash/cli.hpp"

namespace cibhash::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {"code_bits",  "hidden",   "batch",    "epochs",      "lr",
                                           "temperature", "beta",     "mask_prob", "noise_sigma", "scale_lo",
                                           "scale_hi",    "seed",     "mode"};

std::size_t get_count(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(ErrorCode::invalid_argument, "config key '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double get_real(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number()) fail(ErrorCode::invalid_argument, "config key '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorCode::invalid_argument, "config key '" + key + "' must be finite");
  return x;
}

}  // namespace

TrainConfig config_from_json(const json& j, TrainConfig cfg) {
  if (!j.is_object()) fail(ErrorCode::invalid_argument, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!kConfigKeys.count(key)) fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
  }
  if (j.contains("code_bits")) cfg.code_bits = get_count(j, "code_bits");
  if (j.contains("hidden")) cfg.hidden = get_count(j, "hidden");
  if (j.contains("batch")) cfg.batch = get_count(j, "batch");
  if (j.contains("epochs")) cfg.epochs = get_count(j, "epochs");
  if (j.contains("seed")) cfg.seed = get_count(j, "seed");
  if (j.contains("lr")) cfg.lr = get_real(j, "lr");
  if (j.contains("temperature")) cfg.loss.temperature = get_real(j, "temperature");
  if (j.contains("beta")) cfg.loss.beta = get_real(j, "beta");
  if (j.contains("mask_prob")) cfg.views.mask_prob = get_real(j, "mask_prob");
  if (j.contains("noise_sigma")) cfg.views.noise_sigma = get_real(j, "noise_sigma");
  if (j.contains("scale_lo")) cfg.views.scale_lo = get_real(j, "scale_lo");
  if (j.contains("scale_hi")) cfg.views.scale_hi = get_real(j, "scale_hi");
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) fail(ErrorCode::invalid_argument, "config key 'mode' must be a string");
    cfg.mode = parse_train_mode(j["mode"].get<std::string>());
  }
  return cfg;
}

json config_to_json(const TrainConfig& cfg) {
  return {{"code_bits", cfg.code_bits},
          {"hidden", cfg.hidden},
          {"batch", cfg.batch},
          {"epochs", cfg.epochs},
          {"lr", cfg.lr},
          {"temperature", cfg.loss.temperature},
          {"beta", cfg.effective_beta()},
          {"mask_prob", cfg.views.mask_prob},
          {"noise_sigma", cfg.views.noise_sigma},
          {"scale_lo", cfg.views.scale_lo},
          {"scale_hi", cfg.views.scale_hi},
          {"seed", cfg.seed},
          {"mode", to_string(cfg.mode)}};
}

std::string run_id(const std::string& command, const json& config) {
  // FNV-1a over the canonical dump (object keys are sorted)
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : command + "\n" + config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json make_report(const std::string& command, const json& config) {
  json r;
  r["schema"] = kReportSchema;
  r["command"] = command;
  r["run_id"] = run_id(command, config);
  r["config"] = config;
  r["metrics"] = json::object();
  return r;
}

std::vector<std::string> validate_report(const json& r) {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) errs.push_back(what);
  };
  if (!r.is_object()) return {"report is not an object"};
  need(r.contains("schema") && r["schema"] == kReportSchema, "schema must be 1");
  need(r.contains("command") && r["command"].is_string(), "command must be a string");
  need(r.contains("run_id") && r["run_id"].is_string() && r["run_id"].get<std::string>().size() == 16,
       "run_id must be a 16-digit hex string");
  need(r.contains("config") && r["config"].is_object(), "config must be an object");
  if (r.contains("wall_time_s")) need(r["wall_time_s"].is_number() && r["wall_time_s"] >= 0, "bad wall_time_s");
  if (!r.contains("metrics") || !r["metrics"].is_object()) {
    errs.push_back("metrics must be an object");
    return errs;
  }
  auto unit = [](const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };
  for (const auto& [name, value] : r["metrics"].items()) {
    if (name == "pr_curve") {
      need(value.is_array(), "pr_curve must be an array");
      if (!value.is_array()) continue;
      for (const auto& p : value) {
        need(p.is_object() && p.contains("radius") && p["radius"].is_number_unsigned() && p.contains("recall") &&
                 unit(p["recall"]) && p.contains("precision") && unit(p["precision"]),
             "pr_curve point must hold radius and recall/precision in [0, 1]");
      }
    } else {
      need(unit(value), "metric '" + name + "' must be a number in [0, 1]");
    }
  }
  return errs;
}

}  // namespace cibhash::cli
