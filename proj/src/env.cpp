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


#include "bcmq/env.hpp"

#include "bcmq/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace bcmq {

int action_space_size(int num_ues) {
  if (num_ues < 1 || num_ues > 15) throw Error(ErrorKind::InvalidInput, "unsupported UE count " + std::to_string(num_ues));
  return 1 << (2 * num_ues);
}

int NetworkConfig::num_actions() const { return action_space_size(num_ues()); }

std::vector<double> NetworkConfig::log_spaced_powers(int count, double min_w, double max_w) {
  if (count < 2 || !(min_w > 0.0) || !(max_w > min_w)) {
    throw Error(ErrorKind::InvalidConfig, "log-spaced powers need count >= 2 and 0 < min < max");
  }
  std::vector<double> levels(static_cast<std::size_t>(count));
  const double ratio = max_w / min_w;
  for (int i = 0; i < count; ++i) levels[static_cast<std::size_t>(i)] = min_w * std::pow(ratio, double(i) / (count - 1));
  return levels;
}

void NetworkConfig::validate() const {
  if (bs_positions.empty()) throw Error(ErrorKind::InvalidConfig, "at least one BS is required");
  for (std::size_t i = 0; i < bs_positions.size(); ++i) {
    for (std::size_t j = i + 1; j < bs_positions.size(); ++j) {
      if (bs_positions[i].x == bs_positions[j].x && bs_positions[i].y == bs_positions[j].y) {
        throw Error(ErrorKind::InvalidConfig, "BS positions must be distinct");
      }
    }
  }
  if (!(cell_radius > 0.0)) throw Error(ErrorKind::InvalidConfig, "cell radius must be positive");
  if (ues_per_bs < 1) throw Error(ErrorKind::InvalidConfig, "ues_per_bs must be >= 1");
  if (num_ues() > 15) throw Error(ErrorKind::InvalidConfig, "at most 15 UEs are supported");
  if (antennas < 1) throw Error(ErrorKind::InvalidConfig, "antennas must be >= 1");
  if (codebook_size < 2) throw Error(ErrorKind::InvalidConfig, "codebook size must be >= 2");
  if (power_levels_w.size() < 2) throw Error(ErrorKind::InvalidConfig, "at least two power levels are required");
  for (std::size_t i = 0; i < power_levels_w.size(); ++i) {
    if (!(power_levels_w[i] >= 0.0)) throw Error(ErrorKind::InvalidConfig, "power levels must be non-negative");
    if (i > 0 && !(power_levels_w[i] > power_levels_w[i - 1])) {
      throw Error(ErrorKind::InvalidConfig, "power levels must be strictly increasing");
    }
  }
  if (episode_length < 1) throw Error(ErrorKind::InvalidConfig, "episode length must be >= 1");
  if (!(temperature_k >= 0.0) || !(bandwidth_hz >= 0.0) || !(boltzmann >= 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "noise parameters must be non-negative");
  }
  if (!(sinr_min < sinr_max)) throw Error(ErrorKind::InvalidConfig, "sinr_min must be below sinr_max");
  if (!(discount >= 0.0 && discount < 1.0)) throw Error(ErrorKind::InvalidConfig, "discount must lie in [0, 1)");
  path_loss.validate();
}

radio::Point NetworkState::position(int ue, const NetworkConfig& config) const {
  const auto& bs = config.bs_positions[static_cast<std::size_t>(config.serving_bs(ue))];
  const auto& off = ues[static_cast<std::size_t>(ue)].offset;
  return {bs.x + off.x, bs.y + off.y};
}

int encode_action(const JointAction& action) {
  int code = 0;
  for (std::size_t i = action.deltas.size(); i-- > 0;) {
    const auto& d = action.deltas[i];
    if ((d.power != -1 && d.power != 1) || (d.beam != -1 && d.beam != 1)) {
      throw Error(ErrorKind::InvalidInput, "deltas must be -1 or +1");
    }
    const int digit = (d.power > 0 ? 2 : 0) + (d.beam > 0 ? 1 : 0);
    code = code * 4 + digit;
  }
  return code;
}

JointAction decode_action(int encoded, int num_ues) {
  if (encoded < 0 || encoded >= action_space_size(num_ues)) {
    throw Error(ErrorKind::InvalidInput, "action " + std::to_string(encoded) + " outside [0, " +
                                             std::to_string(action_space_size(num_ues)) + ")");
  }
  JointAction action;
  action.deltas.resize(static_cast<std::size_t>(num_ues));
  for (auto& d : action.deltas) {
    const int digit = encoded % 4;
    encoded /= 4;
    d.power = (digit & 2) ? 1 : -1;
    d.beam = (digit & 1) ? 1 : -1;
  }
  return action;
}

std::vector<std::vector<radio::ChannelVector>> sample_channels(const std::vector<UeState>& ues,
                                                               const NetworkConfig& config,
                                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<radio::ChannelVector>> channels(ues.size());
  for (std::size_t u = 0; u < ues.size(); ++u) {
    const auto& serving = config.bs_positions[static_cast<std::size_t>(config.serving_bs(static_cast<int>(u)))];
    const radio::Point pos{serving.x + ues[u].offset.x, serving.y + ues[u].offset.y};
    channels[u].reserve(config.bs_positions.size());
    for (const auto& bs : config.bs_positions) {
      channels[u].push_back(radio::sample_channel(pos, bs, config.antennas, config.path_loss, rng));
    }
  }
  return channels;
}

namespace {

// Nearest float value, widened back. Out of line because GCC 11's vectorizer
// drops the float round trip when this is inlined into reset().
[[gnu::noinline]] double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

NetworkState reset(const NetworkConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NetworkState state;
  state.ues.resize(static_cast<std::size_t>(config.num_ues()));
  const double r = config.cell_radius;
  for (auto& ue : state.ues) {
    const double rho = r * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    // Offsets are snapped so that offset / cell_radius is exactly a float; the
    // observation then carries the precise geometry.
    ue.offset = {round_to_float(rho * std::cos(phi) / r) * r, round_to_float(rho * std::sin(phi) / r) * r};
    ue.power_index = config.num_power_levels() / 2;
    ue.beam_index = 0;
  }
  state.slot = 0;
  state.channel_seed = rng();
  state.channels = sample_channels(state.ues, config, state.channel_seed);
  return state;
}

double noise_power(const NetworkConfig& config) {
  return config.boltzmann * config.temperature_k * config.bandwidth_hz;
}

namespace {

void check_state(const NetworkState& state, const NetworkConfig& config) {
  const auto n = static_cast<std::size_t>(config.num_ues());
  if (state.ues.size() != n || state.channels.size() != n) {
    throw Error(ErrorKind::InvalidInput, "state does not match the configured UE count");
  }
  for (std::size_t u = 0; u < n; ++u) {
    const auto& ue = state.ues[u];
    if (ue.power_index < 0 || ue.power_index >= config.num_power_levels() || ue.beam_index < 0 ||
        ue.beam_index >= config.codebook_size) {
      throw Error(ErrorKind::InvalidInput, "UE " + std::to_string(u) + " has an index out of range");
    }
    if (state.channels[u].size() != config.bs_positions.size()) {
      throw Error(ErrorKind::InvalidInput, "state channel matrix has the wrong shape");
    }
  }
}

// Interference seen by `ue` sums over the UEs served by every other BS; UEs
// sharing a BS are assumed orthogonal.
double sinr_unchecked(const NetworkState& state, int ue, const NetworkConfig& config,
                      const radio::Codebook& codebook) {
  const auto u = static_cast<std::size_t>(ue);
  const int own_bs = config.serving_bs(ue);
  const auto& me = state.ues[u];
  const double signal = config.power_levels_w[static_cast<std::size_t>(me.power_index)] *
                        radio::beam_gain(state.channels[u][static_cast<std::size_t>(own_bs)], codebook[me.beam_index]);
  double interference = 0.0;
  for (int other = 0; other < config.num_ues(); ++other) {
    const int b = config.serving_bs(other);
    if (b == own_bs) continue;
    const auto& tx = state.ues[static_cast<std::size_t>(other)];
    interference += config.power_levels_w[static_cast<std::size_t>(tx.power_index)] *
                    radio::beam_gain(state.channels[u][static_cast<std::size_t>(b)], codebook[tx.beam_index]);
  }
  return signal / (interference + noise_power(config));
}

}  // namespace

double sinr(const NetworkState& state, int ue, const NetworkConfig& config) {
  check_state(state, config);
  if (ue < 0 || ue >= config.num_ues()) throw Error(ErrorKind::InvalidInput, "UE index " + std::to_string(ue) + " out of range");
  const auto codebook = radio::dft_codebook(config.antennas, config.codebook_size);
  return sinr_unchecked(state, ue, config, codebook);
}

std::vector<double> all_sinr(const NetworkState& state, const NetworkConfig& config) {
  check_state(state, config);
  const auto codebook = radio::dft_codebook(config.antennas, config.codebook_size);
  std::vector<double> out(static_cast<std::size_t>(config.num_ues()));
  for (int u = 0; u < config.num_ues(); ++u) out[static_cast<std::size_t>(u)] = sinr_unchecked(state, u, config, codebook);
  return out;
}

double clip_reward(double sum, const NetworkConfig& config) {
  if (std::isnan(sum)) return config.sinr_min;
  return std::clamp(sum, config.sinr_min, config.sinr_max);
}

double reward_from_sinr(std::span<const double> sinr_linear, const NetworkConfig& config) {
  double sum = 0.0;
  for (const double s : sinr_linear) {
    if (config.reward_units == RewardUnits::Decibel) {
      sum += s > 0.0 ? 10.0 * std::log10(s) : -std::numeric_limits<double>::infinity();
    } else {
      sum += s;
    }
  }
  return clip_reward(sum, config);
}

double reward(const NetworkState& state, const NetworkConfig& config) {
  const auto s = all_sinr(state, config);
  return reward_from_sinr(s, config);
}

std::vector<UeState> apply_action(const std::vector<UeState>& ues, const JointAction& action,
                                  const NetworkConfig& config) {
  if (action.deltas.size() != ues.size()) throw Error(ErrorKind::InvalidInput, "action does not match the UE count");
  std::vector<UeState> next = ues;
  for (std::size_t u = 0; u < next.size(); ++u) {
    next[u].power_index = std::clamp(next[u].power_index + action.deltas[u].power, 0, config.num_power_levels() - 1);
    next[u].beam_index = std::clamp(next[u].beam_index + action.deltas[u].beam, 0, config.codebook_size - 1);
  }
  return next;
}

namespace {
thread_local std::uint64_t step_calls = 0;
}

std::uint64_t env_step_count() { return step_calls; }

StepOutcome step(const NetworkState& state, const JointAction& action, const NetworkConfig& config,
                 std::mt19937_64& rng) {
  if (state.slot >= config.episode_length) {
    throw Error(ErrorKind::EpisodeFinished, "slot " + std::to_string(state.slot) + " is already terminal");
  }
  check_state(state, config);
  StepOutcome out;
  out.next_state.ues = apply_action(state.ues, action, config);
  out.next_state.slot = state.slot + 1;
  out.next_state.channel_seed = rng();
  out.next_state.channels = sample_channels(out.next_state.ues, config, out.next_state.channel_seed);
  out.per_ue_sinr = all_sinr(out.next_state, config);
  out.reward = reward_from_sinr(out.per_ue_sinr, config);
  out.done = out.next_state.slot == config.episode_length;
  ++step_calls;
  return out;
}

StepOutcome step(const NetworkState& state, int encoded_action, const NetworkConfig& config,
                 std::mt19937_64& rng) {
  return step(state, decode_action(encoded_action, config.num_ues()), config, rng);
}

std::vector<float> observe(const NetworkState& state, const NetworkConfig& config) {
  const int n = config.num_ues();
  std::vector<float> obs(static_cast<std::size_t>(config.observation_dim()));
  const double p_scale = config.num_power_levels() - 1;
  const double f_scale = config.codebook_size - 1;
  for (int u = 0; u < n; ++u) {
    const auto& ue = state.ues[static_cast<std::size_t>(u)];
    obs[static_cast<std::size_t>(u)] = static_cast<float>(ue.power_index / p_scale);
    obs[static_cast<std::size_t>(n + u)] = static_cast<float>(ue.beam_index / f_scale);
    obs[static_cast<std::size_t>(2 * n + 2 * u)] = static_cast<float>(ue.offset.x / config.cell_radius);
    obs[static_cast<std::size_t>(2 * n + 2 * u + 1)] = static_cast<float>(ue.offset.y / config.cell_radius);
  }
  return obs;
}

std::vector<UeState> decode_observation(std::span<const float> obs, const NetworkConfig& config) {
  if (static_cast<int>(obs.size()) != config.observation_dim()) {
    throw Error(ErrorKind::InvalidInput, "observation has length " + std::to_string(obs.size()) + ", expected " +
                                             std::to_string(config.observation_dim()));
  }
  const int n = config.num_ues();
  std::vector<UeState> ues(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    auto& ue = ues[static_cast<std::size_t>(u)];
    ue.power_index = static_cast<int>(std::lround(obs[static_cast<std::size_t>(u)] * (config.num_power_levels() - 1)));
    ue.beam_index = static_cast<int>(std::lround(obs[static_cast<std::size_t>(n + u)] * (config.codebook_size - 1)));
    ue.offset.x = static_cast<double>(obs[static_cast<std::size_t>(2 * n + 2 * u)]) * config.cell_radius;
    ue.offset.y = static_cast<double>(obs[static_cast<std::size_t>(2 * n + 2 * u + 1)]) * config.cell_radius;
  }
  return ues;
}

OptimalConfiguration exhaustive_optimal(const NetworkState& state, const NetworkConfig& config) {
  check_state(state, config);
  const int n = config.num_ues();
  const int p = config.num_power_levels();
  const int f = config.codebook_size;
  const double per_ue = static_cast<double>(p) * f;
  const double total = std::pow(per_ue, n);
  if (total > static_cast<double>(config.search_budget)) {
    throw Error(ErrorKind::SearchTooLarge, "(P*F)^N_UE = " + std::to_string(total) + " exceeds budget " +
                                               std::to_string(config.search_budget));
  }
  const auto codebook = radio::dft_codebook(config.antennas, config.codebook_size);

  // gains[(u * n + tx) * f + beam] = |h_{u, b(tx)}^H v_beam|^2
  std::vector<double> gains(static_cast<std::size_t>(n * n * f));
  for (int u = 0; u < n; ++u) {
    for (int tx = 0; tx < n; ++tx) {
      const auto& h = state.channels[static_cast<std::size_t>(u)][static_cast<std::size_t>(config.serving_bs(tx))];
      for (int beam = 0; beam < f; ++beam) {
        gains[static_cast<std::size_t>((u * n + tx) * f + beam)] = radio::beam_gain(h, codebook[beam]);
      }
    }
  }
  const double noise = noise_power(config);

  // Odometer over digits (p0, b0, p1, b1, ...), last digit fastest, so the
  // visit order is lexicographic and a strict '>' keeps the smallest argmax.
  std::vector<int> digits(static_cast<std::size_t>(2 * n), 0);
  std::vector<double> sinrs(static_cast<std::size_t>(n));
  OptimalConfiguration best;
  best.reward = -std::numeric_limits<double>::infinity();
  for (;;) {
    for (int u = 0; u < n; ++u) {
      const int own = config.serving_bs(u);
      const auto pu = static_cast<std::size_t>(digits[static_cast<std::size_t>(2 * u)]);
      const int bu = digits[static_cast<std::size_t>(2 * u + 1)];
      const double signal = config.power_levels_w[pu] * gains[static_cast<std::size_t>((u * n + u) * f + bu)];
      double interference = 0.0;
      for (int tx = 0; tx < n; ++tx) {
        if (config.serving_bs(tx) == own) continue;
        const auto pt = static_cast<std::size_t>(digits[static_cast<std::size_t>(2 * tx)]);
        const int bt = digits[static_cast<std::size_t>(2 * tx + 1)];
        interference += config.power_levels_w[pt] * gains[static_cast<std::size_t>((u * n + tx) * f + bt)];
      }
      sinrs[static_cast<std::size_t>(u)] = signal / (interference + noise);
    }
    const double r = reward_from_sinr(sinrs, config);
    ++best.evaluations;
    if (r > best.reward) {
      best.reward = r;
      best.power_index.assign(static_cast<std::size_t>(n), 0);
      best.beam_index.assign(static_cast<std::size_t>(n), 0);
      for (int u = 0; u < n; ++u) {
        best.power_index[static_cast<std::size_t>(u)] = digits[static_cast<std::size_t>(2 * u)];
        best.beam_index[static_cast<std::size_t>(u)] = digits[static_cast<std::size_t>(2 * u + 1)];
      }
    }
    int pos = 2 * n - 1;
    for (; pos >= 0; --pos) {
      auto& d = digits[static_cast<std::size_t>(pos)];
      const int radix = (pos % 2 == 0) ? p : f;
      if (++d < radix) break;
      d = 0;
    }
    if (pos < 0) break;
  }
  return best;
}

Environment::Environment(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
  config_.validate();
}

const NetworkState& Environment::reset() {
  state_ = bcmq::reset(config_, rng_);
  return state_;
}

StepOutcome Environment::step(int encoded_action) {
  auto out = bcmq::step(state_, encoded_action, config_, rng_);
  ++interactions_;
  state_ = out.next_state;
  return out;
}

}  // namespace bcmq
