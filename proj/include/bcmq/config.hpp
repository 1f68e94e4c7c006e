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


#pragma once

#include "bcmq/env.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bcmq {

enum class BehaviorKind { Uniform, Biased };
// Policy used when evaluating a BCQ agent: plain masked argmax, or the
// one-step rollout over the top-k masked actions.
enum class DeployMode { Bcq, Bcmq };

struct AgentConfig {
  double threshold = 0.3;
  int top_k = 2;
  double tau_s = 0.995;
  std::vector<int> hidden_layers{64, 64};
  // Rewards are multiplied by this before entering Bellman targets; a positive
  // scale leaves every argmax unchanged.
  double reward_scale = 0.01;
};

struct TrainConfig {
  int max_iterations = 10000;
  int minibatch_size = 32;
  double learning_rate = 1e-4;
  int eval_every = 500;
  int eval_episodes = 100;
  DeployMode deploy_mode = DeployMode::Bcmq;
  int dqn_replay_capacity = 10000;
  double dqn_epsilon_start = 1.0;
  double dqn_epsilon_end = 0.05;
  std::uint64_t seed = 1;
};

struct DatasetSpec {
  std::size_t size = 20000;
  BehaviorKind policy = BehaviorKind::Uniform;
};

struct EvalSpec {
  int episodes = 1000;
  int repeats = 10;
  double ccdf_resolution_db = 0.5;
  int workers = 1;
};

struct ExperimentConfig {
  NetworkConfig network;
  AgentConfig agent;
  TrainConfig train;
  DatasetSpec dataset;
  EvalSpec eval;
  std::uint64_t seed = 1;
  std::string out = "runs";

  void validate() const;
};

nlohmann::json to_json(const NetworkConfig& config);
nlohmann::json to_json(const ExperimentConfig& config);
// Starts from defaults and overrides every key present; unknown keys throw.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

// Applies one "key=value" override; the value is parsed as JSON when possible
// and taken as a plain string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// 64-bit FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);
// Hash of every key that can influence numeric outputs (drops "out", "workers").
std::string experiment_hash(const ExperimentConfig& config);

std::string to_string(BehaviorKind kind);
BehaviorKind behavior_from_string(const std::string& s);
std::string to_string(DeployMode mode);
DeployMode deploy_mode_from_string(const std::string& s);

}  // namespace bcmq
