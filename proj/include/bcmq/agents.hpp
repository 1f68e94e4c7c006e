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
#include "bcmq/dataset.hpp"
#include "bcmq/env.hpp"
#include "bcmq/eval.hpp"
#include "bcmq/nn.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace bcmq {

// Discrete batch-constrained Q-learning: an action-value net with a soft
// target copy, plus a behavior-policy classifier that masks the greedy step.
struct BcqAgent {
  nn::DenseNet q;
  nn::DenseNet q_target;
  nn::DenseNet g;
  nn::AdamState q_opt;
  nn::AdamState g_opt;
  double threshold = 0.3;
  double discount = 0.9;
  double reward_scale = 1.0;
  int top_k = 2;

  static BcqAgent create(int state_dim, int num_actions, const AgentConfig& agent, double discount,
                         double learning_rate, std::uint64_t seed);
};

struct DqnAgent {
  nn::DenseNet q;
  nn::DenseNet q_target;
  nn::AdamState opt;
  double discount = 0.9;
  double reward_scale = 1.0;
  double epsilon = 1.0;

  static DqnAgent create(int state_dim, int num_actions, const AgentConfig& agent, double discount,
                         double learning_rate, std::uint64_t seed);
};

// {a : p(a|s) / max p >= threshold}; never empty because the argmax passes.
std::vector<int> allowed_from_log_probs(const Eigen::Ref<const Eigen::VectorXd>& log_probs, double threshold);
std::vector<int> allowed_actions(const nn::DenseNet& g, std::span<const float> state, double threshold);

// Masked argmax over `allowed`; ties go to the smallest action id.
int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& values, const std::vector<int>& allowed);

int bcq_policy(const BcqAgent& agent, std::span<const float> state);

std::vector<float> predict_next_state(std::span<const float> state, int action, const NetworkConfig& config);

int bcmq_rollout_action(const BcqAgent& agent, std::span<const float> state, const NetworkConfig& config);

struct TrainLosses {
  double q_loss = 0.0;
  double g_loss = 0.0;
};

// y = c*r for terminal transitions, else c*r + gamma * max over the masked
// next actions of the target network (c = reward_scale).
std::vector<double> bcq_targets(const BcqAgent& agent, const Minibatch& batch);
TrainLosses bcq_train_step(BcqAgent& agent, const Minibatch& batch, double tau_s);

// Unmasked version of bcq_targets.
std::vector<double> dqn_targets(const DqnAgent& agent, const Minibatch& batch);
double dqn_train_step(DqnAgent& agent, const Minibatch& batch, double tau_s);

int dqn_greedy(const DqnAgent& agent, std::span<const float> state);
int dqn_act(const DqnAgent& agent, std::span<const float> state, double epsilon, std::mt19937_64& rng);

// Linear decay from start to end over the first half of the run, then flat.
double epsilon_schedule(int iteration, int max_iterations, double start, double end);

Policy make_bcq_policy(const BcqAgent& agent);
Policy make_bcmq_policy(const BcqAgent& agent, const NetworkConfig& config);
Policy make_dqn_policy(const DqnAgent& agent);

// Seed of the fresh episodes used for the evaluation points of a training run.
std::uint64_t training_eval_seed(std::uint64_t seed);

struct OfflineRunStats {
  std::uint64_t training_interactions = 0;  // environment steps used for gradient data
};

// Trains only from `dataset`. Every eval_every iterations (and at the final
// iteration) the current nets are evaluated on fresh episodes.
TrainingLog train_offline(BcqAgent& agent, const Dataset& dataset, const ExperimentConfig& config,
                          OfflineRunStats* stats = nullptr);

// A bounded replay memory that overwrites its oldest entry when full.
class ReplayMemory {
public:
  explicit ReplayMemory(std::size_t capacity);
  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Transition>& items() const { return items_; }

private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct OnlineRunStats {
  std::uint64_t interactions = 0;
  std::size_t max_replay_size = 0;
};

TrainingLog train_online_dqn(DqnAgent& agent, const ExperimentConfig& config, OnlineRunStats* stats = nullptr);

}  // namespace bcmq
