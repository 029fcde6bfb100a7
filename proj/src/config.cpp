// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "diffse/config.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace diffse {

void RunConfig::validate() const {
  try {
    sde.validate();
    stft.validate();
    loss.validate();
    model.validate();
    sampler.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (loss.mode == LossMode::supervised_direct && model.role != ScorerRole::direct) {
    throw ConfigError("config: loss.mode supervised_direct requires model.role direct");
  }
  if (loss.mode != LossMode::supervised_direct && model.role != ScorerRole::score) {
    throw ConfigError("config: score-based loss modes require model.role score");
  }
}

RunConfig run_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  RunConfig cfg;
  try {
    check_keys(j, "<root>",
               {"seed", "score_convention", "sde", "stft", "loss", "model", "sampler", "paths"});
    read_opt(j, "seed", cfg.seed);
    if (j.contains("score_convention")) {
      cfg.oracle_convention = convention_from_string(j.at("score_convention").get<std::string>());
    }
    if (j.contains("sde")) j.at("sde").get_to(cfg.sde);
    if (j.contains("stft")) j.at("stft").get_to(cfg.stft);
    if (j.contains("loss")) j.at("loss").get_to(cfg.loss);
    if (j.contains("model")) j.at("model").get_to(cfg.model);
    if (j.contains("sampler")) j.at("sampler").get_to(cfg.sampler);
    if (j.contains("paths")) {
      const auto& paths = j.at("paths");
      check_keys(paths, "paths", {"dataset_dir", "output_dir"});
      read_opt(paths, "dataset_dir", cfg.dataset_dir);
      read_opt(paths, "output_dir", cfg.output_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["score_convention"] = to_string(cfg.oracle_convention);
  j["sde"] = cfg.sde;
  j["stft"] = cfg.stft;
  j["loss"] = cfg.loss;
  j["model"] = cfg.model;
  j["sampler"] = cfg.sampler;
  j["paths"] = {{"dataset_dir", cfg.dataset_dir}, {"output_dir", cfg.output_dir}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return run_config_from_json(ss.str());
}

std::filesystem::path write_config_snapshot(const std::filesystem::path& dir, const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "config.resolved.json";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << run_config_to_json(cfg);
  return path;
}

}  // namespace diffse
