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

#include "bcmq/agents.hpp"
#include "bcmq/config.hpp"
#include "bcmq/error.hpp"
#include "bcmq/eval.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// Experiment commands behind the `bcmq` executable. Every command writes into
// <out>/<command>/<run-id>/ together with a manifest.json that is enough to
// re-run it.
namespace bcmq::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsageError = 2,
  kConfigError = 3,
  kFormatError = 4,
  kIoError = 5,
};

int exit_code_for(ErrorKind kind);

// Defaults, then the JSON file (when given), then each "key=value" override.
ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                                const std::vector<std::string>& overrides);

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json manifest;
};

RunResult cmd_gen_data(const ExperimentConfig& config);
// algo: "bcq" (needs a dataset) or "dqn" (must not have one).
RunResult cmd_train(const ExperimentConfig& config, const std::string& algo,
                    const std::optional<std::filesystem::path>& dataset);
// mode: bcq | bcmq | dqn | optimal | random. The learned modes need a checkpoint.
RunResult cmd_eval(const ExperimentConfig& config, const std::string& mode,
                   const std::optional<std::filesystem::path>& checkpoint);
// axis: lr | batch_size | quality. Empty `values` selects the default grid.
RunResult cmd_sweep(const ExperimentConfig& config, const std::string& axis, std::vector<std::string> values);
// Re-executes the command recorded in a manifest; `out` replaces its output root.
RunResult rerun(const std::filesystem::path& manifest_path, const std::optional<std::string>& out);

// Sweep building blocks, also used by the acceptance checks.
std::uint64_t derived_seed(std::uint64_t master, int repeat);
// Seed of the final deployment evaluation for a run seeded with `seed`.
std::uint64_t deployment_eval_seed(std::uint64_t seed);
std::vector<std::string> default_sweep_values(const std::string& axis);
ExperimentConfig with_axis_value(const ExperimentConfig& config, const std::string& axis, const std::string& value);

struct RepeatResult {
  std::uint64_t seed = 0;
  TrainingLog log;
  double final_mean = 0.0;
  double final_std = 0.0;
};

// Generates the run's dataset, trains BCQ on it and evaluates the deployed
// policy (config.train.deploy_mode) on config.eval.episodes fresh episodes.
RepeatResult run_offline_repeat(const ExperimentConfig& config, std::uint64_t seed);
// Online DQN with the same iteration budget and the same final evaluation.
RepeatResult run_dqn_repeat(const ExperimentConfig& config, std::uint64_t seed);

// Runs job(i) for i in [0, n) on at most `workers` threads; results keep job order.
std::vector<RepeatResult> run_pool(int n, int workers, const std::function<RepeatResult(int)>& job);

}  // namespace bcmq::cli
