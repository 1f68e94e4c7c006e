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


#include "bcmq/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::string out;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  o.config_opt = sub->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  o.seed_opt = sub->add_option("--seed", o.seed, "master seed");
  o.out_opt = sub->add_option("--out", o.out, "output root directory");
  sub->add_option("--set", o.sets, "override one config key, key=value (repeatable)");
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

bcmq::ExperimentConfig resolve(const CommonOptions& o, std::vector<std::string> extra) {
  std::vector<std::string> overrides = o.sets;
  if (*o.seed_opt) overrides.push_back("seed=" + std::to_string(o.seed));
  if (*o.out_opt) overrides.push_back("out=" + json_string(o.out));
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  std::optional<std::filesystem::path> path;
  if (*o.config_opt) path = o.config;
  return bcmq::cli::resolve_config(path, overrides);
}

void report(const bcmq::cli::RunResult& r) {
  const auto& m = r.manifest;
  fmt::print("run: {}\n", r.dir.string());
  for (const auto& [key, value] : m.at("results").items()) fmt::print("{}: {}\n", key, value.dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline beamforming and power control experiments"};
  app.require_subcommand(1, 1);

  CommonOptions gen_o;
  std::string gen_policy;
  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset with a behavior policy");
  add_common(gen, gen_o);
  auto* gen_policy_opt = gen->add_option("--policy", gen_policy, "behavior policy")
                             ->check(CLI::IsMember({"uniform", "biased"}));

  CommonOptions train_o;
  std::string algo;
  std::string dataset;
  auto* train = app.add_subcommand("train", "train BCQ offline or DQN online");
  add_common(train, train_o);
  train->add_option("--algo", algo, "bcq or dqn")->required();
  auto* dataset_opt = train->add_option("--dataset", dataset, "dataset file (bcq only)")->check(CLI::ExistingFile);

  CommonOptions eval_o;
  std::string mode;
  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "evaluate a policy on fresh episodes");
  add_common(eval, eval_o);
  eval->add_option("--mode", mode, "bcq, bcmq, dqn, optimal or random")->required();
  auto* checkpoint_opt =
      eval->add_option("--checkpoint", checkpoint, "checkpoint from train")->check(CLI::ExistingFile);

  CommonOptions sweep_o;
  std::string axis;
  std::vector<std::string> values;
  int repeats = 0;
  std::string sweep_policy;
  auto* sweep = app.add_subcommand("sweep", "repeat offline training over one hyperparameter axis");
  add_common(sweep, sweep_o);
  sweep->add_option("--axis", axis, "lr, batch_size or quality")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->delimiter(',');
  auto* repeats_opt = sweep->add_option("--repeats", repeats, "runs per value")->check(CLI::PositiveNumber);
  auto* sweep_policy_opt = sweep->add_option("--policy", sweep_policy, "behavior policy of the datasets")
                               ->check(CLI::IsMember({"uniform", "biased"}));

  std::string manifest;
  std::string rerun_out;
  auto* rerun = app.add_subcommand("rerun", "repeat the command recorded in a manifest");
  rerun->add_option("--manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  auto* rerun_out_opt = rerun->add_option("--out", rerun_out, "output root directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? bcmq::cli::kOk : bcmq::cli::kUsageError;
  }

  try {
    if (gen->parsed()) {
      std::vector<std::string> extra;
      if (*gen_policy_opt) extra.push_back("dataset_policy=" + json_string(gen_policy));
      report(bcmq::cli::cmd_gen_data(resolve(gen_o, extra)));
    } else if (train->parsed()) {
      std::optional<std::filesystem::path> ds;
      if (*dataset_opt) ds = dataset;
      report(bcmq::cli::cmd_train(resolve(train_o, {}), algo, ds));
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> cp;
      if (*checkpoint_opt) cp = checkpoint;
      report(bcmq::cli::cmd_eval(resolve(eval_o, {}), mode, cp));
    } else if (sweep->parsed()) {
      std::vector<std::string> extra;
      if (*repeats_opt) extra.push_back("repeats=" + std::to_string(repeats));
      if (*sweep_policy_opt) extra.push_back("dataset_policy=" + json_string(sweep_policy));
      const auto r = bcmq::cli::cmd_sweep(resolve(sweep_o, extra), axis, values);
      fmt::print("run: {}\n", r.dir.string());
    } else if (rerun->parsed()) {
      std::optional<std::string> out;
      if (*rerun_out_opt) out = rerun_out;
      report(bcmq::cli::rerun(manifest, out));
    }
  } catch (const bcmq::Error& e) {
    fmt::print(stderr, "bcmq: {}\n", e.what());
    return bcmq::cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "bcmq: {}\n", e.what());
    return bcmq::cli::kFailure;
  }
  return bcmq::cli::kOk;
}
