// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#include "bcmq/config.hpp"

#include "bcmq/error.hpp"

#include <fmt/core.h>

#include <fstream>
#include <set>

namespace bcmq {

using nlohmann::json;

std::string to_string(BehaviorKind kind) { return kind == BehaviorKind::Uniform ? "uniform" : "biased"; }

BehaviorKind behavior_from_string(const std::string& s) {
  if (s == "uniform") return BehaviorKind::Uniform;
  if (s == "biased") return BehaviorKind::Biased;
  throw Error(ErrorKind::InvalidConfig, "unknown behavior policy '" + s + "' (uniform | biased)");
}

std::string to_string(DeployMode mode) { return mode == DeployMode::Bcq ? "bcq" : "bcmq"; }

DeployMode deploy_mode_from_string(const std::string& s) {
  if (s == "bcq") return DeployMode::Bcq;
  if (s == "bcmq") return DeployMode::Bcmq;
  throw Error(ErrorKind::InvalidConfig, "unknown deploy mode '" + s + "' (bcq | bcmq)");
}

namespace {

std::string units_string(RewardUnits u) { return u == RewardUnits::Decibel ? "db" : "linear"; }

RewardUnits units_from_string(const std::string& s) {
  if (s == "db") return RewardUnits::Decibel;
  if (s == "linear") return RewardUnits::Linear;
  throw Error(ErrorKind::InvalidConfig, "unknown reward_units '" + s + "' (db | linear)");
}

}  // namespace

json to_json(const NetworkConfig& c) {
  json bs = json::array();
  for (const auto& p : c.bs_positions) bs.push_back({p.x, p.y});
  return json{
      {"bs_positions", bs},
      {"cell_radius", c.cell_radius},
      {"ues_per_bs", c.ues_per_bs},
      {"antennas", c.antennas},
      {"codebook_size", c.codebook_size},
      {"power_levels_w", c.power_levels_w},
      {"episode_length", c.episode_length},
      {"temperature_k", c.temperature_k},
      {"bandwidth_hz", c.bandwidth_hz},
      {"boltzmann", c.boltzmann},
      {"sinr_min", c.sinr_min},
      {"sinr_max", c.sinr_max},
      {"reward_units", units_string(c.reward_units)},
      {"discount", c.discount},
      {"carrier_freq_hz", c.path_loss.carrier_freq_hz},
      {"ref_distance_m", c.path_loss.ref_distance_m},
      {"path_loss_exponent", c.path_loss.exponent},
      {"num_paths", c.path_loss.num_paths},
      {"search_budget", c.search_budget},
  };
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.network);
  j["threshold"] = c.agent.threshold;
  j["top_k"] = c.agent.top_k;
  j["tau_s"] = c.agent.tau_s;
  j["hidden_layers"] = c.agent.hidden_layers;
  j["reward_scale"] = c.agent.reward_scale;
  j["max_iterations"] = c.train.max_iterations;
  j["minibatch_size"] = c.train.minibatch_size;
  j["learning_rate"] = c.train.learning_rate;
  j["eval_every"] = c.train.eval_every;
  j["eval_episodes_during_training"] = c.train.eval_episodes;
  j["deploy_mode"] = to_string(c.train.deploy_mode);
  j["dqn_replay_capacity"] = c.train.dqn_replay_capacity;
  j["dqn_epsilon_start"] = c.train.dqn_epsilon_start;
  j["dqn_epsilon_end"] = c.train.dqn_epsilon_end;
  j["dataset_size"] = c.dataset.size;
  j["dataset_policy"] = to_string(c.dataset.policy);
  j["eval_episodes"] = c.eval.episodes;
  j["repeats"] = c.eval.repeats;
  j["ccdf_resolution_db"] = c.eval.ccdf_resolution_db;
  j["workers"] = c.eval.workers;
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  ExperimentConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    auto& n = c.network;
    if (j.contains("bs_positions")) {
      n.bs_positions.clear();
      for (const auto& p : j.at("bs_positions")) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorKind::InvalidConfig, "bs_positions entries must be [x, y]");
        n.bs_positions.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    }
    get("cell_radius", n.cell_radius);
    get("ues_per_bs", n.ues_per_bs);
    get("antennas", n.antennas);
    get("codebook_size", n.codebook_size);
    get("power_levels_w", n.power_levels_w);
    get("episode_length", n.episode_length);
    get("temperature_k", n.temperature_k);
    get("bandwidth_hz", n.bandwidth_hz);
    get("boltzmann", n.boltzmann);
    get("sinr_min", n.sinr_min);
    get("sinr_max", n.sinr_max);
    if (j.contains("reward_units")) n.reward_units = units_from_string(j.at("reward_units").get<std::string>());
    get("discount", n.discount);
    get("carrier_freq_hz", n.path_loss.carrier_freq_hz);
    get("ref_distance_m", n.path_loss.ref_distance_m);
    get("path_loss_exponent", n.path_loss.exponent);
    get("num_paths", n.path_loss.num_paths);
    get("search_budget", n.search_budget);

    get("threshold", c.agent.threshold);
    get("top_k", c.agent.top_k);
    get("tau_s", c.agent.tau_s);
    get("hidden_layers", c.agent.hidden_layers);
    get("reward_scale", c.agent.reward_scale);

    get("max_iterations", c.train.max_iterations);
    get("minibatch_size", c.train.minibatch_size);
    get("learning_rate", c.train.learning_rate);
    get("eval_every", c.train.eval_every);
    get("eval_episodes_during_training", c.train.eval_episodes);
    if (j.contains("deploy_mode")) c.train.deploy_mode = deploy_mode_from_string(j.at("deploy_mode").get<std::string>());
    get("dqn_replay_capacity", c.train.dqn_replay_capacity);
    get("dqn_epsilon_start", c.train.dqn_epsilon_start);
    get("dqn_epsilon_end", c.train.dqn_epsilon_end);

    get("dataset_size", c.dataset.size);
    if (j.contains("dataset_policy")) c.dataset.policy = behavior_from_string(j.at("dataset_policy").get<std::string>());

    get("eval_episodes", c.eval.episodes);
    get("repeats", c.eval.repeats);
    get("ccdf_resolution_db", c.eval.ccdf_resolution_db);
    get("workers", c.eval.workers);

    get("seed", c.seed);
    get("out", c.out);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config value has the wrong type: ") + e.what());
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  network.validate();
  if (!(agent.threshold >= 0.0 && agent.threshold <= 1.0)) throw Error(ErrorKind::InvalidConfig, "threshold must lie in [0, 1]");
  if (!(agent.reward_scale > 0.0)) throw Error(ErrorKind::InvalidConfig, "reward_scale must be positive");
  if (agent.top_k < 1) throw Error(ErrorKind::InvalidConfig, "top_k must be >= 1");
  if (!(agent.tau_s >= 0.0 && agent.tau_s <= 1.0)) throw Error(ErrorKind::InvalidConfig, "tau_s must lie in [0, 1]");
  for (const int h : agent.hidden_layers) {
    if (h < 1) throw Error(ErrorKind::InvalidConfig, "hidden layer widths must be positive");
  }
  if (train.max_iterations < 1 || train.minibatch_size < 1 || train.eval_every < 1 || train.eval_episodes < 1) {
    throw Error(ErrorKind::InvalidConfig, "training counts must be positive");
  }
  if (!(train.learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning rate must be positive");
  if (train.dqn_replay_capacity < 1) throw Error(ErrorKind::InvalidConfig, "dqn replay capacity must be positive");
  if (!(train.dqn_epsilon_start >= 0.0 && train.dqn_epsilon_start <= 1.0 && train.dqn_epsilon_end >= 0.0 &&
        train.dqn_epsilon_end <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "exploration rates must lie in [0, 1]");
  }
  if (dataset.size < 1) throw Error(ErrorKind::InvalidConfig, "dataset size must be >= 1");
  if (eval.episodes < 1 || eval.repeats < 1 || eval.workers < 1) {
    throw Error(ErrorKind::InvalidConfig, "evaluation counts must be positive");
  }
  if (!(eval.ccdf_resolution_db > 0.0)) throw Error(ErrorKind::InvalidConfig, "ccdf resolution must be positive");
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::InvalidConfig, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  j[key] = value.is_discarded() ? json(text) : value;
}

std::string config_hash(const json& j) {
  // nlohmann's default object type is an ordered std::map, so dump() is canonical.
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string experiment_hash(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("out");
  j.erase("workers");
  return config_hash(j);
}

}  // namespace bcmq
