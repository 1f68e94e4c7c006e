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

#include "bcmq/config.hpp"
#include "bcmq/env.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace bcmq {

class BehaviorPolicy {
public:
  static BehaviorPolicy uniform(int num_actions);
  // Uniform over the first ceil(|A|/4) action ids.
  static BehaviorPolicy biased(int num_actions);
  static BehaviorPolicy make(BehaviorKind kind, int num_actions);

  BehaviorKind kind() const { return kind_; }
  const std::vector<int>& support() const { return support_; }
  int sample(std::mt19937_64& rng) const;

private:
  BehaviorPolicy(BehaviorKind kind, std::vector<int> support) : kind_(kind), support_(std::move(support)) {}
  BehaviorKind kind_;
  std::vector<int> support_;
};

struct Transition {
  std::vector<float> state;
  int action = 0;
  float reward = 0.0f;
  std::vector<float> next_state;
  bool done = false;
  // Seed of the channels the reward was measured on (those of next_state).
  std::uint64_t channel_seed = 0;

  bool operator==(const Transition&) const = default;
};

struct DatasetMetadata {
  std::string config_hash;
  BehaviorKind policy = BehaviorKind::Uniform;
  std::uint64_t seed = 0;
  int state_dim = 0;
  int num_actions = 0;

  bool operator==(const DatasetMetadata&) const = default;
};

struct Dataset {
  std::vector<Transition> transitions;
  DatasetMetadata metadata;

  std::size_t size() const { return transitions.size(); }
  bool operator==(const Dataset&) const = default;
};

// Runs fresh episodes under `policy` until exactly n_samples transitions exist.
Dataset generate(const NetworkConfig& config, const BehaviorPolicy& policy, std::size_t n_samples,
                 std::uint64_t seed);

void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

// Uniform with replacement.
std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t batch_size, std::mt19937_64& rng);
std::vector<Transition> sample_minibatch(const Dataset& dataset, std::size_t batch_size, std::mt19937_64& rng);

// Column-per-sample view of a batch of transitions for the training code.
struct Minibatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd next_states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<bool> done;

  std::size_t size() const { return actions.size(); }
};

Minibatch gather(const std::vector<Transition>& transitions, const std::vector<std::size_t>& indices);
Minibatch gather(const std::vector<Transition>& transitions);

// Rebuilds the post-action state from the stored observation and channel seed
// and recomputes its reward.
double replay_reward(const Transition& transition, const NetworkConfig& config);

}  // namespace bcmq
