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

#include "helpers.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <set>

using namespace bcmq;
using cd = std::complex<double>;

namespace {

radio::ChannelVector channel(std::initializer_list<cd> taps) {
  radio::ChannelVector h;
  h.coefficients.resize(static_cast<Eigen::Index>(taps.size()));
  Eigen::Index i = 0;
  for (const auto& t : taps) h.coefficients[i++] = t;
  h.large_scale_gain = 1.0;
  return h;
}

// |sum_m conj(h_m) exp(j 2 pi m i / F) / sqrt(M)|^2, written out longhand.
double hand_gain(const radio::ChannelVector& h, int beam, int f) {
  const auto m_count = h.coefficients.size();
  cd acc = 0.0;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(m) * beam / f;
    acc += std::conj(h.coefficients[m]) * cd(std::cos(phase), std::sin(phase));
  }
  return std::norm(acc) / static_cast<double>(m_count);
}

NetworkConfig single_cell(int antennas, int codebook, std::vector<double> powers) {
  NetworkConfig c;
  c.bs_positions = {{0.0, 0.0}};
  c.antennas = antennas;
  c.codebook_size = codebook;
  c.power_levels_w = std::move(powers);
  return c;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("noise power") {
  NetworkConfig c;
  CHECK(noise_power(c) == doctest::Approx(6.003e-17).epsilon(1e-12));
  NetworkConfig wide = c;
  wide.bandwidth_hz *= 2.0;
  CHECK(noise_power(wide) == doctest::Approx(2.0 * noise_power(c)).epsilon(1e-15));
  NetworkConfig cold = c;
  cold.temperature_k = 0.0;
  CHECK(noise_power(cold) == 0.0);
}

TEST_CASE("single-cell SINR with a matched beam equals 1 / noise") {
  const auto c = single_cell(4, 2, {0.5, 1.0});
  NetworkState s;
  s.ues = {UeState{1, 0, {}}};
  s.channels = {{radio::ChannelVector{radio::array_response(0.0, 4), 1.0}}};
  const double expected = 1.0 / noise_power(c);
  CHECK(std::abs(sinr(s, 0, c) - expected) / expected < 1e-10);
  CHECK_ERROR_KIND(sinr(s, 1, c), ErrorKind::InvalidInput);
  CHECK_ERROR_KIND(sinr(s, -1, c), ErrorKind::InvalidInput);
}

TEST_CASE("two-cell SINR matches a longhand evaluation") {
  NetworkConfig c;
  c.antennas = 2;
  c.codebook_size = 2;
  c.power_levels_w = {0.5, 2.0};
  NetworkState s;
  s.ues = {UeState{1, 0, {}}, UeState{0, 1, {}}};
  s.channels = {{channel({{1e-4, 2e-5}, {-3e-5, 1e-5}}), channel({{2e-6, 0.0}, {1e-6, -4e-6}})},
                {channel({{5e-7, 5e-7}, {-1e-6, 2e-7}}), channel({{3e-5, -1e-5}, {2e-5, 4e-5}})}};
  const double n0 = 1.38e-23 * 290.0 * 15000.0;
  const double sinr0 = 2.0 * hand_gain(s.channels[0][0], 0, 2) / (0.5 * hand_gain(s.channels[0][1], 1, 2) + n0);
  const double sinr1 = 0.5 * hand_gain(s.channels[1][1], 1, 2) / (2.0 * hand_gain(s.channels[1][0], 0, 2) + n0);
  CHECK(std::abs(sinr(s, 0, c) - sinr0) / sinr0 < 1e-10);
  CHECK(std::abs(sinr(s, 1, c) - sinr1) / sinr1 < 1e-10);

  // a silent interferer leaves only the single-cell term
  NetworkConfig quiet = c;
  quiet.power_levels_w = {0.0, 2.0};
  const double alone = 2.0 * hand_gain(s.channels[0][0], 0, 2) / n0;
  CHECK(std::abs(sinr(s, 0, quiet) - alone) / alone < 1e-10);
}

TEST_CASE("SINR is invariant to relabeling the cells") {
  NetworkConfig c;
  std::mt19937_64 rng(5);
  auto s = reset(c, rng);
  s.ues[0].beam_index = 2;
  s.ues[1].power_index = 6;
  NetworkConfig swapped = c;
  std::swap(swapped.bs_positions[0], swapped.bs_positions[1]);
  NetworkState t = s;
  std::swap(t.ues[0], t.ues[1]);
  t.channels = {{s.channels[1][1], s.channels[1][0]}, {s.channels[0][1], s.channels[0][0]}};
  CHECK(sinr(t, 1, swapped) == doctest::Approx(sinr(s, 0, c)).epsilon(1e-12));
  CHECK(sinr(t, 0, swapped) == doctest::Approx(sinr(s, 1, c)).epsilon(1e-12));
}

TEST_CASE("reward clipping") {
  NetworkConfig c;
  CHECK(clip_reward(300.0, c) == 200.0);
  CHECK(clip_reward(10.0, c) == 10.0);
  CHECK(clip_reward(-80.0, c) == -50.0);
  CHECK(clip_reward(std::nan(""), c) == -50.0);
}

TEST_CASE("reward units") {
  NetworkConfig db;
  const std::vector<double> s{10.0, 100.0};
  CHECK(reward_from_sinr(s, db) == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(reward_from_sinr(std::vector<double>{0.0, 100.0}, db) == -50.0);
  NetworkConfig lin = db;
  lin.reward_units = RewardUnits::Linear;
  CHECK(reward_from_sinr(s, lin) == 110.0);
  CHECK(reward_from_sinr(std::vector<double>{150.0, 150.0}, lin) == 200.0);
}

TEST_CASE("reset") {
  NetworkConfig c;
  std::mt19937_64 a(11), b(11);
  const auto s1 = reset(c, a);
  const auto s2 = reset(c, b);
  CHECK(s1.slot == 0);
  CHECK(s1.channel_seed == s2.channel_seed);
  for (int u = 0; u < 2; ++u) {
    CHECK(s1.ues[u].offset.x == s2.ues[u].offset.x);
    CHECK(s1.ues[u].offset.y == s2.ues[u].offset.y);
    CHECK(s1.ues[u].power_index == 4);
    CHECK(s1.ues[u].beam_index == 0);
    CHECK(s1.channels[u].size() == 2);
  }
  std::mt19937_64 rng(12);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = reset(c, rng);
    for (int u = 0; u < 2; ++u) {
      const auto pos = s.position(u, c);
      worst = std::max(worst, radio::distance(pos, c.bs_positions[static_cast<std::size_t>(c.serving_bs(u))]));
    }
  }
  CHECK(worst <= 150.0);
  CHECK(worst > 140.0);
}

TEST_CASE("action encoding") {
  CHECK(action_space_size(2) == 16);
  CHECK(action_space_size(1) == 4);
  for (int a = 0; a < 16; ++a) CHECK(encode_action(decode_action(a, 2)) == a);
  const auto zero = decode_action(0, 2);
  for (const auto& d : zero.deltas) {
    CHECK(d.power == -1);
    CHECK(d.beam == -1);
  }
  // UE 0 is the least significant digit: 1 -> UE 0 (-1, +1)
  const auto one = decode_action(1, 2);
  CHECK(one.deltas[0].power == -1);
  CHECK(one.deltas[0].beam == 1);
  CHECK(one.deltas[1].power == -1);
  const auto nine = decode_action(9, 2);  // digits (1, 2)
  CHECK(nine.deltas[0].beam == 1);
  CHECK(nine.deltas[1].power == 1);
  CHECK(nine.deltas[1].beam == -1);
  CHECK_ERROR_KIND(decode_action(16, 2), ErrorKind::InvalidInput);
  CHECK_ERROR_KIND(decode_action(-1, 2), ErrorKind::InvalidInput);
}

TEST_CASE("step dynamics") {
  NetworkConfig c;
  std::mt19937_64 rng(21);
  auto s = reset(c, rng);
  s.ues[0].power_index = 7;
  s.ues[0].beam_index = 3;
  // action 15: every UE (+1, +1)
  std::mt19937_64 r1(4), r2(4);
  const auto o1 = step(s, 15, c, r1);
  const auto o2 = step(s, 15, c, r2);
  CHECK(o1.next_state.ues[0].power_index == 7);
  CHECK(o1.next_state.ues[0].beam_index == 3);
  CHECK(o1.next_state.ues[1].power_index == 5);
  CHECK(o1.next_state.ues[1].beam_index == 1);
  CHECK(o1.reward == o2.reward);
  CHECK(o1.next_state.channel_seed == o2.next_state.channel_seed);
  CHECK(o1.next_state.slot == 1);
  CHECK_FALSE(o1.done);
  CHECK(o1.reward >= -50.0);
  CHECK(o1.reward <= 200.0);
  CHECK(o1.reward == reward(o1.next_state, c));
  for (int u = 0; u < 2; ++u) {
    CHECK(o1.next_state.ues[u].offset.x == s.ues[u].offset.x);
    CHECK(o1.next_state.ues[u].offset.y == s.ues[u].offset.y);
  }
}

TEST_CASE("episodes end after T slots") {
  NetworkConfig c;
  c.episode_length = 3;
  Environment env(c, 8);
  env.reset();
  CHECK_FALSE(env.step(0).done);
  CHECK_FALSE(env.step(5).done);
  const auto last = env.step(10);
  CHECK(last.done);
  CHECK(last.next_state.slot == 3);
  CHECK_ERROR_KIND(env.step(0), ErrorKind::EpisodeFinished);
  CHECK(env.interactions() == 3);
}

TEST_CASE("observation layout round trip") {
  NetworkConfig c;
  std::mt19937_64 rng(2);
  auto s = reset(c, rng);
  s.ues[1].power_index = 7;
  s.ues[0].beam_index = 2;
  const auto obs = observe(s, c);
  REQUIRE(obs.size() == 8);
  CHECK(obs[1] == 1.0f);
  CHECK(obs[2] == static_cast<float>(2.0 / 3.0));
  const auto back = decode_observation(obs, c);
  for (int u = 0; u < 2; ++u) {
    CHECK(back[u].power_index == s.ues[u].power_index);
    CHECK(back[u].beam_index == s.ues[u].beam_index);
    CHECK(back[u].offset.x == s.ues[u].offset.x);
    CHECK(back[u].offset.y == s.ues[u].offset.y);
  }
}

TEST_CASE("exhaustive search visits every configuration") {
  NetworkConfig c;
  c.power_levels_w = {0.01, 1.0};
  c.codebook_size = 2;
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = reset(c, rng);
    const auto best = exhaustive_optimal(s, c);
    CHECK(best.evaluations == 16);
    double top = -1e300;
    for (int p0 = 0; p0 < 2; ++p0)
      for (int b0 = 0; b0 < 2; ++b0)
        for (int p1 = 0; p1 < 2; ++p1)
          for (int b1 = 0; b1 < 2; ++b1) {
            NetworkState t = s;
            t.ues[0].power_index = p0;
            t.ues[0].beam_index = b0;
            t.ues[1].power_index = p1;
            t.ues[1].beam_index = b1;
            const double r = reward(t, c);
            CHECK(best.reward >= r);
            top = std::max(top, r);
          }
    CHECK(best.reward == top);
  }
}

TEST_CASE("exhaustive search on a single UE picks the best codeword at full power") {
  auto c = single_cell(4, 4, {0.1, 1.0, 2.0});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    NetworkState s = reset(c, rng);
    const auto& h = s.channels[0][0];
    int want = 0;
    for (int f = 1; f < 4; ++f) {
      if (hand_gain(h, f, 4) > hand_gain(h, want, 4)) want = f;
    }
    const auto best = exhaustive_optimal(s, c);
    CHECK(best.power_index[0] == 2);
    CHECK(best.beam_index[0] == want);
  }
}

TEST_CASE("exhaustive search respects its budget") {
  NetworkConfig c;
  c.search_budget = 100;
  std::mt19937_64 rng(1);
  const auto s = reset(c, rng);
  CHECK_ERROR_KIND(exhaustive_optimal(s, c), ErrorKind::SearchTooLarge);
}

TEST_CASE("config validation") {
  NetworkConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.power_levels_w = {1.0};
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
  bad = c;
  bad.codebook_size = 1;
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
  bad = c;
  bad.sinr_min = 300.0;
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
  bad = c;
  bad.bs_positions = {{1.0, 1.0}, {1.0, 1.0}};
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
  bad = c;
  bad.episode_length = 0;
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidConfig);
  const auto levels = NetworkConfig::log_spaced_powers(8, 1e-3, 2.0);
  CHECK(levels.front() == doctest::Approx(1e-3));
  CHECK(levels.back() == doctest::Approx(2.0));
  CHECK(levels[1] / levels[0] == doctest::Approx(levels[7] / levels[6]));
}

}
