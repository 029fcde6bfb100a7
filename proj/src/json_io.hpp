// Copyright 2026 The diffse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// JSON mappings shared by configuration files and checkpoint headers.
// Unknown keys are rejected; missing keys keep their defaults.

#pragma once

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "diffse/neural_scorer.hpp"
#include "diffse/sampler.hpp"
#include "diffse/sde.hpp"
#include "diffse/spectral.hpp"
#include "diffse/training.hpp"

namespace diffse {

inline void check_keys(const nlohmann::json& j, const std::string& section,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("config: unknown key '" + section + "." + item.key() + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void to_json(nlohmann::json& j, const SdeParams& p) {
  j = {{"gamma", p.gamma}, {"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max},
       {"t_eps", p.t_eps}, {"t_max", p.t_max}};
}

inline void from_json(const nlohmann::json& j, SdeParams& p) {
  check_keys(j, "sde", {"gamma", "sigma_min", "sigma_max", "t_eps", "t_max"});
  read_opt(j, "gamma", p.gamma);
  read_opt(j, "sigma_min", p.sigma_min);
  read_opt(j, "sigma_max", p.sigma_max);
  read_opt(j, "t_eps", p.t_eps);
  read_opt(j, "t_max", p.t_max);
}

inline void to_json(nlohmann::json& j, const StftConfig& c) {
  j = {{"window_len", c.window_len},
       {"hop", c.hop},
       {"window", to_string(c.window)},
       {"compression_enabled", c.compression_enabled},
       {"compression_exponent", c.compression_exponent},
       {"compression_scale", c.compression_scale}};
}

inline void from_json(const nlohmann::json& j, StftConfig& c) {
  check_keys(j, "stft", {"window_len", "hop", "window", "compression_enabled",
                         "compression_exponent", "compression_scale"});
  read_opt(j, "window_len", c.window_len);
  read_opt(j, "hop", c.hop);
  if (j.contains("window")) c.window = window_from_string(j.at("window").get<std::string>());
  read_opt(j, "compression_enabled", c.compression_enabled);
  read_opt(j, "compression_exponent", c.compression_exponent);
  read_opt(j, "compression_scale", c.compression_scale);
}

inline void to_json(nlohmann::json& j, const ScorerArchitecture& a) {
  j = {{"hidden_channels", a.hidden_channels},
       {"dilations", a.dilations},
       {"time_embedding", a.time_embedding},
       {"data_scale", a.data_scale},
       {"role", to_string(a.role)}};
}

inline void from_json(const nlohmann::json& j, ScorerArchitecture& a) {
  check_keys(j, "model", {"hidden_channels", "dilations", "time_embedding", "data_scale", "role"});
  read_opt(j, "hidden_channels", a.hidden_channels);
  read_opt(j, "dilations", a.dilations);
  read_opt(j, "time_embedding", a.time_embedding);
  read_opt(j, "data_scale", a.data_scale);
  if (j.contains("role")) a.role = role_from_string(j.at("role").get<std::string>());
}

inline void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"tweedie_factor", to_string(c.tweedie_factor)},
       {"alpha_schedule", c.alpha_schedule.str()},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"ema_decay", c.ema_decay},
       {"total_steps", c.total_steps},
       {"grad_clip", c.grad_clip},
       {"crop_freq", c.crop_freq},
       {"crop_frames", c.crop_frames}};
}

inline void from_json(const nlohmann::json& j, LossConfig& c) {
  check_keys(j, "loss", {"mode", "tweedie_factor", "alpha_schedule", "batch_size",
                         "learning_rate", "ema_decay", "total_steps", "grad_clip",
                         "crop_freq", "crop_frames"});
  if (j.contains("mode")) c.mode = loss_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("tweedie_factor")) {
    c.tweedie_factor = tweedie_from_string(j.at("tweedie_factor").get<std::string>());
  }
  if (j.contains("alpha_schedule")) {
    c.alpha_schedule = AlphaSchedule::parse(j.at("alpha_schedule").get<std::string>());
  }
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "ema_decay", c.ema_decay);
  read_opt(j, "total_steps", c.total_steps);
  read_opt(j, "grad_clip", c.grad_clip);
  read_opt(j, "crop_freq", c.crop_freq);
  read_opt(j, "crop_frames", c.crop_frames);
}

inline void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = {{"n_steps", c.n_steps},
       {"corrector_steps", c.corrector_steps},
       {"snr", c.snr},
       {"final_tweedie", c.final_tweedie},
       {"seed", c.seed},
       {"tweedie_factor", c.tweedie_factor ? to_string(*c.tweedie_factor) : "matched"}};
}

inline void from_json(const nlohmann::json& j, SamplerConfig& c) {
  check_keys(j, "sampler", {"n_steps", "corrector_steps", "snr", "final_tweedie", "seed",
                            "tweedie_factor"});
  read_opt(j, "n_steps", c.n_steps);
  read_opt(j, "corrector_steps", c.corrector_steps);
  read_opt(j, "snr", c.snr);
  read_opt(j, "final_tweedie", c.final_tweedie);
  read_opt(j, "seed", c.seed);
  if (j.contains("tweedie_factor")) {
    const auto s = j.at("tweedie_factor").get<std::string>();
    if (s == "matched") {
      c.tweedie_factor.reset();
    } else {
      c.tweedie_factor = tweedie_from_string(s);
    }
  }
}

}  // namespace diffse
