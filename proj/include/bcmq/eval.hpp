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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bcmq {

// A deployed policy maps an observation to an encoded joint action.
using Policy = std::function<int(std::span<const float>)>;

inline constexpr double kCcdfMinDb = -5.0;
inline constexpr double kCcdfMaxDb = 60.0;

struct EvalReport {
  std::string policy;
  std::uint64_t seed = 0;
  int episodes = 0;
  std::vector<double> episode_returns;  // undiscounted sum of rewards
  std::vector<double> step_rewards;     // episode-major, T per episode
  std::vector<double> sinr_db;          // per step per UE, inside [-5, 60] dB only
  std::size_t discarded_sinr = 0;       // samples that fell outside the window

  double mean_return() const;
  double std_return() const;
};

// Episodes use an environment generator seeded with `seed`; the policy never
// draws from it, so any two policies see the same layouts and channel draws.
EvalReport evaluate_policy(const Policy& policy, const NetworkConfig& config, int n_episodes, std::uint64_t seed,
                           std::string tag = "policy");

// At every slot, applies the exhaustive-search configuration for the channels
// the reward is measured on.
EvalReport optimal_reference(const NetworkConfig& config, int n_episodes, std::uint64_t seed);

double to_db(double linear);

struct CcdfCurve {
  std::vector<double> grid;    // dB
  std::vector<double> values;  // P(X > x)
};

CcdfCurve ccdf(std::span<const double> samples_db, double resolution_db);

struct LogRow {
  int iteration = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double q_loss = 0.0;
  double g_loss = 0.0;
};
using TrainingLog = std::vector<LogRow>;

struct BandRow {
  int iteration = 0;
  double mean = 0.0;
  double deviation = 0.0;  // population standard deviation across runs
  double lo = 0.0;
  double hi = 0.0;
};

// Pointwise mean and deviation of mean_reward across runs sharing one grid.
std::vector<BandRow> aggregate_runs(const std::vector<TrainingLog>& logs);

}  // namespace bcmq
