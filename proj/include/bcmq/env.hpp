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

#include "bcmq/radio.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace bcmq {

// How per-UE SINRs are summed before clipping into the reward.
enum class RewardUnits { Linear, Decibel };

struct NetworkConfig {
  std::vector<radio::Point> bs_positions{{0.0, 0.0}, {0.0, 255.0}};
  double cell_radius = 150.0;
  int ues_per_bs = 1;
  int antennas = 4;
  int codebook_size = 4;
  std::vector<double> power_levels_w = log_spaced_powers(8, 1e-3, 2.0);
  int episode_length = 20;
  double temperature_k = 290.0;
  double bandwidth_hz = 15000.0;
  double boltzmann = 1.38e-23;
  double sinr_min = -50.0;
  double sinr_max = 200.0;
  RewardUnits reward_units = RewardUnits::Decibel;
  double discount = 0.9;
  radio::PathLossParams path_loss{};
  std::uint64_t search_budget = 1'000'000;

  int num_bs() const { return static_cast<int>(bs_positions.size()); }
  int num_ues() const { return num_bs() * ues_per_bs; }
  int num_power_levels() const { return static_cast<int>(power_levels_w.size()); }
  int num_actions() const;
  int serving_bs(int ue) const { return ue / ues_per_bs; }
  // Observation length: power, beam and two coordinates per UE.
  int observation_dim() const { return 4 * num_ues(); }

  void validate() const;

  static std::vector<double> log_spaced_powers(int count, double min_w, double max_w);
};

struct UeState {
  int power_index = 0;
  int beam_index = 0;
  // Position relative to the serving BS, in meters.
  radio::Point offset{};
};

struct NetworkState {
  std::vector<UeState> ues;
  // channels[u][b] is the channel from BS b to UE u.
  std::vector<std::vector<radio::ChannelVector>> channels;
  int slot = 0;
  // Seed from which `channels` was drawn; channels are a pure function of
  // (UE offsets, channel_seed).
  std::uint64_t channel_seed = 0;

  radio::Point position(int ue, const NetworkConfig& config) const;
};

struct UeDelta {
  int power = -1;  // -1 or +1
  int beam = -1;   // -1 or +1
};

// Per-UE deltas; encoded as mixed-radix base 4 with UE 0 least significant and
// digit 0 <-> (-1,-1), 1 <-> (-1,+1), 2 <-> (+1,-1), 3 <-> (+1,+1).
struct JointAction {
  std::vector<UeDelta> deltas;
};

int action_space_size(int num_ues);
int encode_action(const JointAction& action);
JointAction decode_action(int encoded, int num_ues);

struct StepOutcome {
  NetworkState next_state;
  double reward = 0.0;
  std::vector<double> per_ue_sinr;
  bool done = false;
};

// Draws every (UE, BS) channel from a fresh generator seeded with `seed`.
std::vector<std::vector<radio::ChannelVector>> sample_channels(const std::vector<UeState>& ues,
                                                               const NetworkConfig& config,
                                                               std::uint64_t seed);

NetworkState reset(const NetworkConfig& config, std::mt19937_64& rng);
double noise_power(const NetworkConfig& config);
double sinr(const NetworkState& state, int ue, const NetworkConfig& config);
std::vector<double> all_sinr(const NetworkState& state, const NetworkConfig& config);
double clip_reward(double sum, const NetworkConfig& config);
double reward_from_sinr(std::span<const double> sinr_linear, const NetworkConfig& config);
double reward(const NetworkState& state, const NetworkConfig& config);
StepOutcome step(const NetworkState& state, const JointAction& action, const NetworkConfig& config,
                 std::mt19937_64& rng);
StepOutcome step(const NetworkState& state, int encoded_action, const NetworkConfig& config,
                 std::mt19937_64& rng);

// Number of step() calls made on the calling thread so far.
std::uint64_t env_step_count();

// Index dynamics only: clamp(index + delta) for every UE.
std::vector<UeState> apply_action(const std::vector<UeState>& ues, const JointAction& action,
                                  const NetworkConfig& config);

// Flat observation: [power indices / (P-1), beam indices / (F-1), offsets / cell_radius].
std::vector<float> observe(const NetworkState& state, const NetworkConfig& config);
// Inverse of observe() for the index and coordinate fields; channels are not restored.
std::vector<UeState> decode_observation(std::span<const float> obs, const NetworkConfig& config);

struct OptimalConfiguration {
  std::vector<int> power_index;
  std::vector<int> beam_index;
  double reward = 0.0;
  std::uint64_t evaluations = 0;
};

// Brute force over all (P*F)^N_UE joint assignments at the state's channels.
// Ties resolve to the lexicographically smallest (p0, b0, p1, b1, ...).
OptimalConfiguration exhaustive_optimal(const NetworkState& state, const NetworkConfig& config);

// Stateful wrapper owning a config, a generator and the current state. Counts
// every step() so callers can prove that no interaction took place.
class Environment {
public:
  Environment(NetworkConfig config, std::uint64_t seed);

  const NetworkState& reset();
  StepOutcome step(int encoded_action);

  const NetworkState& state() const { return state_; }
  const NetworkConfig& config() const { return config_; }
  std::vector<float> observation() const { return observe(state_, config_); }
  std::uint64_t interactions() const { return interactions_; }

private:
  NetworkConfig config_;
  std::mt19937_64 rng_;
  NetworkState state_;
  std::uint64_t interactions_ = 0;
};

}  // namespace bcmq
