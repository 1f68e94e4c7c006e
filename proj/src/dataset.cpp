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


#include "bcmq/dataset.hpp"

#include "bcmq/container.hpp"
#include "bcmq/error.hpp"

namespace bcmq {

BehaviorPolicy BehaviorPolicy::uniform(int num_actions) {
  if (num_actions < 1) throw Error(ErrorKind::InvalidConfig, "behavior policy needs at least one action");
  std::vector<int> all(static_cast<std::size_t>(num_actions));
  for (int a = 0; a < num_actions; ++a) all[static_cast<std::size_t>(a)] = a;
  return BehaviorPolicy(BehaviorKind::Uniform, std::move(all));
}

BehaviorPolicy BehaviorPolicy::biased(int num_actions) {
  if (num_actions < 1) throw Error(ErrorKind::InvalidConfig, "behavior policy needs at least one action");
  const int count = (num_actions + 3) / 4;
  std::vector<int> subset(static_cast<std::size_t>(count));
  for (int a = 0; a < count; ++a) subset[static_cast<std::size_t>(a)] = a;
  return BehaviorPolicy(BehaviorKind::Biased, std::move(subset));
}

BehaviorPolicy BehaviorPolicy::make(BehaviorKind kind, int num_actions) {
  return kind == BehaviorKind::Uniform ? uniform(num_actions) : biased(num_actions);
}

int BehaviorPolicy::sample(std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, support_.size() - 1);
  return support_[pick(rng)];
}

Dataset generate(const NetworkConfig& config, const BehaviorPolicy& policy, std::size_t n_samples,
                 std::uint64_t seed) {
  config.validate();
  if (n_samples < 1) throw Error(ErrorKind::InvalidInput, "dataset needs at least one sample");
  Dataset ds;
  ds.metadata = {config_hash(to_json(config)), policy.kind(), seed, config.observation_dim(), config.num_actions()};
  ds.transitions.reserve(n_samples);

  std::mt19937_64 env_rng(seed);
  std::mt19937_64 policy_rng(seed ^ 0x5bd1e9955bd1e995ULL);
  NetworkState state = reset(config, env_rng);
  auto obs = observe(state, config);
  while (ds.transitions.size() < n_samples) {
    const int action = policy.sample(policy_rng);
    auto out = step(state, action, config, env_rng);
    auto next_obs = observe(out.next_state, config);
    ds.transitions.push_back(
        {obs, action, static_cast<float>(out.reward), next_obs, out.done, out.next_state.channel_seed});
    if (out.done) {
      state = reset(config, env_rng);
      obs = observe(state, config);
    } else {
      state = std::move(out.next_state);
      obs = std::move(next_obs);
    }
  }
  return ds;
}

// Record layout (little-endian): state f32[D], action u32, reward f32,
// next_state f32[D], done u8, channel_seed u64.
void save(const Dataset& dataset, const std::filesystem::path& path) {
  const auto dim = static_cast<std::size_t>(dataset.metadata.state_dim);
  container::Writer w;
  w.bytes().reserve(dataset.size() * (8 * dim + 17));
  for (const auto& t : dataset.transitions) {
    if (t.state.size() != dim || t.next_state.size() != dim) {
      throw Error(ErrorKind::InvalidInput, "transition dimension disagrees with dataset metadata");
    }
    for (const float v : t.state) w.f32(v);
    w.u32(static_cast<std::uint32_t>(t.action));
    w.f32(t.reward);
    for (const float v : t.next_state) w.f32(v);
    w.u8(t.done ? 1 : 0);
    w.u64(t.channel_seed);
  }
  nlohmann::json header{
      {"kind", "dataset"},
      {"n_samples", dataset.size()},
      {"state_dim", dataset.metadata.state_dim},
      {"num_actions", dataset.metadata.num_actions},
      {"config_hash", dataset.metadata.config_hash},
      {"policy", to_string(dataset.metadata.policy)},
      {"seed", dataset.metadata.seed},
  };
  container::write(path, std::move(header), w.bytes());
}

Dataset load(const std::filesystem::path& path) {
  const auto blob = container::read(path, "dataset");
  Dataset ds;
  std::size_t n = 0;
  try {
    const auto& h = blob.header;
    n = h.at("n_samples").get<std::size_t>();
    ds.metadata.state_dim = h.at("state_dim").get<int>();
    ds.metadata.num_actions = h.at("num_actions").get<int>();
    ds.metadata.config_hash = h.at("config_hash").get<std::string>();
    ds.metadata.policy = behavior_from_string(h.at("policy").get<std::string>());
    ds.metadata.seed = h.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": dataset header: " + e.what());
  }
  if (ds.metadata.state_dim < 1 || ds.metadata.num_actions < 1) {
    throw Error(ErrorKind::Format, path.string() + ": non-positive dimensions in header");
  }
  const auto dim = static_cast<std::size_t>(ds.metadata.state_dim);
  const std::size_t record = 8 * dim + 17;
  if (blob.payload.size() != n * record) {
    throw Error(ErrorKind::Format, path.string() + ": payload of " + std::to_string(blob.payload.size()) +
                                       " bytes does not hold " + std::to_string(n) + " records of dimension " +
                                       std::to_string(dim));
  }
  container::Reader r(blob.payload);
  ds.transitions.resize(n);
  for (auto& t : ds.transitions) {
    t.state.resize(dim);
    for (auto& v : t.state) v = r.f32();
    t.action = static_cast<int>(r.u32());
    t.reward = r.f32();
    t.next_state.resize(dim);
    for (auto& v : t.next_state) v = r.f32();
    t.done = r.u8() != 0;
    t.channel_seed = r.u64();
    if (t.action < 0 || t.action >= ds.metadata.num_actions) {
      throw Error(ErrorKind::Format, path.string() + ": stored action out of range");
    }
  }
  return ds;
}

std::vector<std::size_t> sample_indices(std::size_t dataset_size, std::size_t batch_size, std::mt19937_64& rng) {
  if (dataset_size == 0) throw Error(ErrorKind::InvalidInput, "cannot sample from an empty dataset");
  if (batch_size < 1 || batch_size > dataset_size) {
    throw Error(ErrorKind::InvalidInput, "batch size " + std::to_string(batch_size) + " outside [1, " +
                                             std::to_string(dataset_size) + "]");
  }
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

std::vector<Transition> sample_minibatch(const Dataset& dataset, std::size_t batch_size, std::mt19937_64& rng) {
  const auto idx = sample_indices(dataset.size(), batch_size, rng);
  std::vector<Transition> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(dataset.transitions[i]);
  return out;
}

Minibatch gather(const std::vector<Transition>& transitions, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error(ErrorKind::InvalidInput, "empty minibatch");
  const auto dim = static_cast<Eigen::Index>(transitions[indices.front()].state.size());
  const auto n = static_cast<Eigen::Index>(indices.size());
  Minibatch b;
  b.states.resize(dim, n);
  b.next_states.resize(dim, n);
  b.actions.reserve(indices.size());
  b.rewards.reserve(indices.size());
  b.done.reserve(indices.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& t = transitions[indices[static_cast<std::size_t>(c)]];
    for (Eigen::Index r = 0; r < dim; ++r) {
      b.states(r, c) = t.state[static_cast<std::size_t>(r)];
      b.next_states(r, c) = t.next_state[static_cast<std::size_t>(r)];
    }
    b.actions.push_back(t.action);
    b.rewards.push_back(t.reward);
    b.done.push_back(t.done);
  }
  return b;
}

Minibatch gather(const std::vector<Transition>& transitions) {
  std::vector<std::size_t> idx(transitions.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(transitions, idx);
}

double replay_reward(const Transition& transition, const NetworkConfig& config) {
  NetworkState state;
  state.ues = decode_observation(transition.next_state, config);
  state.channel_seed = transition.channel_seed;
  state.channels = sample_channels(state.ues, config, state.channel_seed);
  return reward(state, config);
}

}  // namespace bcmq
