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


#include "bcmq/agents.hpp"

#include "bcmq/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace bcmq {

namespace {

std::vector<int> layer_dims(int state_dim, int num_actions, const AgentConfig& agent) {
  std::vector<int> dims{state_dim};
  dims.insert(dims.end(), agent.hidden_layers.begin(), agent.hidden_layers.end());
  dims.push_back(num_actions);
  return dims;
}

constexpr std::uint64_t kGeneratorSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

BcqAgent BcqAgent::create(int state_dim, int num_actions, const AgentConfig& agent, double discount,
                          double learning_rate, std::uint64_t seed) {
  const auto dims = layer_dims(state_dim, num_actions, agent);
  BcqAgent a;
  a.q = nn::DenseNet(dims, nn::Head::Linear, seed);
  a.q_target = a.q;
  a.g = nn::DenseNet(dims, nn::Head::LogSoftmax, seed ^ kGeneratorSalt);
  a.q_opt = nn::make_adam(a.q, learning_rate);
  a.g_opt = nn::make_adam(a.g, learning_rate);
  a.threshold = agent.threshold;
  a.discount = discount;
  a.reward_scale = agent.reward_scale;
  a.top_k = agent.top_k;
  return a;
}

DqnAgent DqnAgent::create(int state_dim, int num_actions, const AgentConfig& agent, double discount,
                          double learning_rate, std::uint64_t seed) {
  DqnAgent a;
  a.q = nn::DenseNet(layer_dims(state_dim, num_actions, agent), nn::Head::Linear, seed);
  a.q_target = a.q;
  a.opt = nn::make_adam(a.q, learning_rate);
  a.discount = discount;
  a.reward_scale = agent.reward_scale;
  return a;
}

std::vector<int> allowed_from_log_probs(const Eigen::Ref<const Eigen::VectorXd>& log_probs, double threshold) {
  const double top = log_probs.maxCoeff();
  std::vector<int> allowed;
  allowed.reserve(static_cast<std::size_t>(log_probs.size()));
  for (Eigen::Index a = 0; a < log_probs.size(); ++a) {
    // p(a) / max p, computed in log space; exactly 1 for the argmax.
    if (std::exp(log_probs[a] - top) >= threshold) allowed.push_back(static_cast<int>(a));
  }
  return allowed;
}

std::vector<int> allowed_actions(const nn::DenseNet& g, std::span<const float> state, double threshold) {
  return allowed_from_log_probs(nn::predict_one(g, state), threshold);
}

int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& values, const std::vector<int>& allowed) {
  if (allowed.empty()) throw Error(ErrorKind::InvalidInput, "argmax over an empty action set");
  int best = allowed.front();
  for (const int a : allowed) {
    if (values[a] > values[best] || (values[a] == values[best] && a < best)) best = a;
  }
  return best;
}

int bcq_policy(const BcqAgent& agent, std::span<const float> state) {
  const auto allowed = allowed_actions(agent.g, state, agent.threshold);
  return masked_argmax(nn::predict_one(agent.q, state), allowed);
}

std::vector<float> predict_next_state(std::span<const float> state, int action, const NetworkConfig& config) {
  const auto ues = decode_observation(state, config);
  const auto next = apply_action(ues, decode_action(action, config.num_ues()), config);
  std::vector<float> out(state.begin(), state.end());
  const int n = config.num_ues();
  const double p_scale = config.num_power_levels() - 1;
  const double f_scale = config.codebook_size - 1;
  for (int u = 0; u < n; ++u) {
    const auto& ue = next[static_cast<std::size_t>(u)];
    out[static_cast<std::size_t>(u)] = static_cast<float>(ue.power_index / p_scale);
    out[static_cast<std::size_t>(n + u)] = static_cast<float>(ue.beam_index / f_scale);
  }
  return out;
}

int bcmq_rollout_action(const BcqAgent& agent, std::span<const float> state, const NetworkConfig& config) {
  if (agent.top_k < 1) throw Error(ErrorKind::InvalidConfig, "top_k must be >= 1");
  const Eigen::VectorXd q_now = nn::predict_one(agent.q, state);
  auto candidates = allowed_actions(agent.g, state, agent.threshold);
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) { return q_now[a] > q_now[b]; });
  if (static_cast<int>(candidates.size()) > agent.top_k) candidates.resize(static_cast<std::size_t>(agent.top_k));

  const auto dim = static_cast<Eigen::Index>(state.size());
  Eigen::MatrixXd next(dim, static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto s = predict_next_state(state, candidates[c], config);
    for (Eigen::Index r = 0; r < dim; ++r) next(r, static_cast<Eigen::Index>(c)) = s[static_cast<std::size_t>(r)];
  }
  const Eigen::MatrixXd q_next = nn::predict(agent.q, next);
  const Eigen::MatrixXd lp_next = nn::predict(agent.g, next);

  // Candidates are ordered by Q(s, a) descending, then by id, so keeping the
  // first strict maximum implements the tie-break.
  int best = candidates.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    const auto allowed = allowed_from_log_probs(lp_next.col(col), agent.threshold);
    const double score = q_next(masked_argmax(q_next.col(col), allowed), col);
    if (score > best_score) {
      best_score = score;
      best = candidates[c];
    }
  }
  return best;
}

std::vector<double> bcq_targets(const BcqAgent& agent, const Minibatch& batch) {
  if (batch.size() == 0) throw Error(ErrorKind::InvalidInput, "empty minibatch");
  const Eigen::MatrixXd q_next = nn::predict(agent.q_target, batch.next_states);
  const Eigen::MatrixXd lp_next = nn::predict(agent.g, batch.next_states);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.done[i]) {
      y[i] = agent.reward_scale * batch.rewards[i];
      continue;
    }
    const auto col = static_cast<Eigen::Index>(i);
    const auto allowed = allowed_from_log_probs(lp_next.col(col), agent.threshold);
    double best = -std::numeric_limits<double>::infinity();
    for (const int a : allowed) best = std::max(best, q_next(a, col));
    y[i] = agent.reward_scale * batch.rewards[i] + agent.discount * best;
  }
  return y;
}

std::vector<double> dqn_targets(const DqnAgent& agent, const Minibatch& batch) {
  if (batch.size() == 0) throw Error(ErrorKind::InvalidInput, "empty minibatch");
  const Eigen::MatrixXd q_next = nn::predict(agent.q_target, batch.next_states);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.done[i]) {
      y[i] = agent.reward_scale * batch.rewards[i];
      continue;
    }
    const auto col = static_cast<Eigen::Index>(i);
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < q_next.rows(); ++a) best = std::max(best, q_next(a, col));
    y[i] = agent.reward_scale * batch.rewards[i] + agent.discount * best;
  }
  return y;
}

namespace {

// One Adam step of MSE between Q(s, a) and fixed targets; returns the loss.
double fit_q(nn::DenseNet& q, nn::AdamState& opt, const Minibatch& batch, const std::vector<double>& targets) {
  const auto cache = nn::forward(q, batch.states);
  std::vector<double> pred(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) pred[i] = cache.output(batch.actions[i], static_cast<Eigen::Index>(i));
  const auto mse = nn::mse_loss(pred, targets);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(cache.output.rows(), cache.output.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    grad(batch.actions[i], static_cast<Eigen::Index>(i)) = mse.grad[static_cast<Eigen::Index>(i)];
  }
  const auto grads = nn::backward(q, cache, grad);
  nn::adam_step(q, grads, opt);
  return mse.loss;
}

}  // namespace

TrainLosses bcq_train_step(BcqAgent& agent, const Minibatch& batch, double tau_s) {
  const auto targets = bcq_targets(agent, batch);
  TrainLosses losses;
  losses.q_loss = fit_q(agent.q, agent.q_opt, batch, targets);

  const auto cache = nn::forward(agent.g, batch.states);
  const auto nll = nn::nll_loss(cache.output, batch.actions);
  const auto grads = nn::backward(agent.g, cache, nll.grad_logits);
  nn::adam_step(agent.g, grads, agent.g_opt);
  losses.g_loss = nll.loss;

  nn::soft_update(agent.q_target, agent.q, tau_s);
  return losses;
}

double dqn_train_step(DqnAgent& agent, const Minibatch& batch, double tau_s) {
  const auto targets = dqn_targets(agent, batch);
  const double loss = fit_q(agent.q, agent.opt, batch, targets);
  nn::soft_update(agent.q_target, agent.q, tau_s);
  return loss;
}

int dqn_greedy(const DqnAgent& agent, std::span<const float> state) {
  const Eigen::VectorXd q = nn::predict_one(agent.q, state);
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return static_cast<int>(best);
}

int dqn_act(const DqnAgent& agent, std::span<const float> state, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, agent.q.output_dim() - 1);
    return pick(rng);
  }
  return dqn_greedy(agent, state);
}

double epsilon_schedule(int iteration, int max_iterations, double start, double end) {
  const double horizon = std::max(1.0, 0.5 * max_iterations);
  const double frac = std::min(1.0, iteration / horizon);
  return start + (end - start) * frac;
}

Policy make_bcq_policy(const BcqAgent& agent) {
  return [&agent](std::span<const float> s) { return bcq_policy(agent, s); };
}

Policy make_bcmq_policy(const BcqAgent& agent, const NetworkConfig& config) {
  return [&agent, config](std::span<const float> s) { return bcmq_rollout_action(agent, s, config); };
}

Policy make_dqn_policy(const DqnAgent& agent) {
  return [&agent](std::span<const float> s) { return dqn_greedy(agent, s); };
}

std::uint64_t training_eval_seed(std::uint64_t seed) { return seed ^ 0xe7a1c0de5eed0001ULL; }

namespace {

bool is_eval_point(int iteration, const TrainConfig& train) {
  return iteration % train.eval_every == 0 || iteration == train.max_iterations;
}

LogRow eval_row(int iteration, const EvalReport& report, double q_loss, double g_loss, int steps) {
  const double n = std::max(steps, 1);
  return {iteration, report.mean_return(), report.std_return(), q_loss / n, g_loss / n};
}

}  // namespace

TrainingLog train_offline(BcqAgent& agent, const Dataset& dataset, const ExperimentConfig& config,
                          OfflineRunStats* stats) {
  const auto& train = config.train;
  if (dataset.size() == 0) throw Error(ErrorKind::InvalidInput, "offline training needs a non-empty dataset");
  if (dataset.metadata.state_dim != agent.q.input_dim() || dataset.metadata.num_actions != agent.q.output_dim()) {
    throw Error(ErrorKind::InvalidInput, "dataset dimensions do not match the agent");
  }
  const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(train.minibatch_size), dataset.size());
  std::mt19937_64 rng(train.seed);
  const auto eval_seed = training_eval_seed(train.seed);
  const Policy policy = train.deploy_mode == DeployMode::Bcmq ? make_bcmq_policy(agent, config.network)
                                                              : make_bcq_policy(agent);
  TrainingLog log;
  double q_acc = 0.0;
  double g_acc = 0.0;
  int steps = 0;
  std::uint64_t training_steps = 0;
  for (int it = 1; it <= train.max_iterations; ++it) {
    const auto before = env_step_count();
    const auto idx = sample_indices(dataset.size(), batch_size, rng);
    const auto losses = bcq_train_step(agent, gather(dataset.transitions, idx), config.agent.tau_s);
    training_steps += env_step_count() - before;
    q_acc += losses.q_loss;
    g_acc += losses.g_loss;
    ++steps;
    if (is_eval_point(it, train)) {
      const auto report = evaluate_policy(policy, config.network, train.eval_episodes, eval_seed, "bcq");
      log.push_back(eval_row(it, report, q_acc, g_acc, steps));
      q_acc = g_acc = 0.0;
      steps = 0;
    }
  }
  if (stats) stats->training_interactions = training_steps;
  return log;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorKind::InvalidConfig, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity_, 1u << 16));
}

void ReplayMemory::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

TrainingLog train_online_dqn(DqnAgent& agent, const ExperimentConfig& config, OnlineRunStats* stats) {
  const auto& train = config.train;
  Environment env(config.network, train.seed);
  std::mt19937_64 act_rng(train.seed ^ 0xac7105eedULL);
  std::mt19937_64 batch_rng(train.seed);
  const auto eval_seed = training_eval_seed(train.seed);
  ReplayMemory replay(static_cast<std::size_t>(train.dqn_replay_capacity));
  const Policy policy = make_dqn_policy(agent);

  env.reset();
  auto obs = env.observation();
  TrainingLog log;
  OnlineRunStats local;
  double q_acc = 0.0;
  int steps = 0;
  for (int it = 1; it <= train.max_iterations; ++it) {
    agent.epsilon = epsilon_schedule(it - 1, train.max_iterations, train.dqn_epsilon_start, train.dqn_epsilon_end);
    const int action = dqn_act(agent, obs, agent.epsilon, act_rng);
    auto out = env.step(action);
    auto next_obs = observe(out.next_state, config.network);
    replay.push({obs, action, static_cast<float>(out.reward), next_obs, out.done, out.next_state.channel_seed});
    local.max_replay_size = std::max(local.max_replay_size, replay.size());
    if (out.done) {
      env.reset();
      obs = env.observation();
    } else {
      obs = std::move(next_obs);
    }
    if (replay.size() >= static_cast<std::size_t>(train.minibatch_size)) {
      const auto idx = sample_indices(replay.size(), static_cast<std::size_t>(train.minibatch_size), batch_rng);
      q_acc += dqn_train_step(agent, gather(replay.items(), idx), config.agent.tau_s);
      ++steps;
    }
    if (is_eval_point(it, train)) {
      const auto report = evaluate_policy(policy, config.network, train.eval_episodes, eval_seed, "dqn");
      log.push_back(eval_row(it, report, q_acc, 0.0, steps));
      q_acc = 0.0;
      steps = 0;
    }
  }
  local.interactions = env.interactions();
  if (stats) *stats = local;
  return log;
}

}  // namespace bcmq
