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


#include "bcmq/eval.hpp"

#include "bcmq/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace bcmq {

namespace {

double population_std(std::span<const double> xs, double mean) {
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

double mean_of(std::span<const double> xs) {
  double acc = 0.0;
  for (const double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

void record_sinr(EvalReport& report, std::span<const double> sinr_linear) {
  for (const double s : sinr_linear) {
    const double db = to_db(s);
    if (db >= kCcdfMinDb && db <= kCcdfMaxDb) {
      report.sinr_db.push_back(db);
    } else {
      ++report.discarded_sinr;
    }
  }
}

}  // namespace

double EvalReport::mean_return() const { return episode_returns.empty() ? 0.0 : mean_of(episode_returns); }

double EvalReport::std_return() const {
  return episode_returns.empty() ? 0.0 : population_std(episode_returns, mean_return());
}

double to_db(double linear) {
  return linear > 0.0 ? 10.0 * std::log10(linear) : -std::numeric_limits<double>::infinity();
}

EvalReport evaluate_policy(const Policy& policy, const NetworkConfig& config, int n_episodes, std::uint64_t seed,
                           std::string tag) {
  if (n_episodes < 1) throw Error(ErrorKind::InvalidInput, "evaluation needs at least one episode");
  config.validate();
  EvalReport report;
  report.policy = std::move(tag);
  report.seed = seed;
  report.episodes = n_episodes;
  report.episode_returns.reserve(static_cast<std::size_t>(n_episodes));
  report.step_rewards.reserve(static_cast<std::size_t>(n_episodes * config.episode_length));
  std::mt19937_64 rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    NetworkState state = reset(config, rng);
    double ret = 0.0;
    for (bool done = false; !done;) {
      const auto obs = observe(state, config);
      const int action = policy(obs);
      auto out = step(state, action, config, rng);
      ret += out.reward;
      report.step_rewards.push_back(out.reward);
      record_sinr(report, out.per_ue_sinr);
      done = out.done;
      state = std::move(out.next_state);
    }
    report.episode_returns.push_back(ret);
  }
  return report;
}

EvalReport optimal_reference(const NetworkConfig& config, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw Error(ErrorKind::InvalidInput, "evaluation needs at least one episode");
  config.validate();
  EvalReport report;
  report.policy = "optimal";
  report.seed = seed;
  report.episodes = n_episodes;
  std::mt19937_64 rng(seed);
  for (int e = 0; e < n_episodes; ++e) {
    NetworkState state = reset(config, rng);
    double ret = 0.0;
    for (bool done = false; !done;) {
      // The action only fixes indices; the channel draw is the same for every
      // action, so any action reproduces the slot's channels.
      auto out = step(state, 0, config, rng);
      const auto best = exhaustive_optimal(out.next_state, config);
      for (std::size_t u = 0; u < out.next_state.ues.size(); ++u) {
        out.next_state.ues[u].power_index = best.power_index[u];
        out.next_state.ues[u].beam_index = best.beam_index[u];
      }
      const auto sinrs = all_sinr(out.next_state, config);
      const double r = reward_from_sinr(sinrs, config);
      ret += r;
      report.step_rewards.push_back(r);
      record_sinr(report, sinrs);
      done = out.done;
      state = std::move(out.next_state);
    }
    report.episode_returns.push_back(ret);
  }
  return report;
}

CcdfCurve ccdf(std::span<const double> samples_db, double resolution_db) {
  if (!(resolution_db > 0.0)) throw Error(ErrorKind::InvalidInput, "ccdf resolution must be positive");
  std::vector<double> kept;
  kept.reserve(samples_db.size());
  for (const double s : samples_db) {
    if (s >= kCcdfMinDb && s <= kCcdfMaxDb) kept.push_back(s);
  }
  if (kept.empty()) throw Error(ErrorKind::EmptySample, "no SINR samples inside [-5, 60] dB");
  std::sort(kept.begin(), kept.end());

  CcdfCurve curve;
  const auto points = static_cast<int>(std::floor((kCcdfMaxDb - kCcdfMinDb) / resolution_db + 1e-9)) + 1;
  curve.grid.reserve(static_cast<std::size_t>(points));
  curve.values.reserve(static_cast<std::size_t>(points));
  const double n = static_cast<double>(kept.size());
  for (int i = 0; i < points; ++i) {
    const double x = kCcdfMinDb + i * resolution_db;
    const auto above = kept.end() - std::upper_bound(kept.begin(), kept.end(), x);
    curve.grid.push_back(x);
    curve.values.push_back(static_cast<double>(above) / n);
  }
  return curve;
}

std::vector<BandRow> aggregate_runs(const std::vector<TrainingLog>& logs) {
  if (logs.empty()) throw Error(ErrorKind::InvalidInput, "no runs to aggregate");
  const auto points = logs.front().size();
  for (const auto& log : logs) {
    if (log.size() != points) throw Error(ErrorKind::InvalidInput, "runs have different evaluation grids");
    for (std::size_t i = 0; i < points; ++i) {
      if (log[i].iteration != logs.front()[i].iteration) {
        throw Error(ErrorKind::InvalidInput, "runs have different evaluation grids");
      }
    }
  }
  std::vector<BandRow> bands;
  bands.reserve(points);
  std::vector<double> column(logs.size());
  for (std::size_t i = 0; i < points; ++i) {
    for (std::size_t r = 0; r < logs.size(); ++r) column[r] = logs[r][i].mean_reward;
    // Summation in sorted order makes the result independent of run order.
    std::sort(column.begin(), column.end());
    BandRow row;
    row.iteration = logs.front()[i].iteration;
    row.mean = mean_of(column);
    row.deviation = population_std(column, row.mean);
    row.lo = row.mean - row.deviation;
    row.hi = row.mean + row.deviation;
    bands.push_back(row);
  }
  return bands;
}

}  // namespace bcmq
