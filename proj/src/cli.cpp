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

#include "bcmq/dataset.hpp"
#include "bcmq/error.hpp"
#include "bcmq/nn.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cctype>
#include <atomic>
#include <exception>
#include <fstream>
#include <iterator>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace bcmq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kRandomPolicySalt = 0x7a3d5eed0b1ec7edULL;
constexpr std::uint64_t kDeploySalt = 0xd3b1070e5eed0002ULL;
constexpr std::size_t kRunIdLength = 12;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::string file_hash(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

json experiment_json(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("out");
  j.erase("workers");
  return j;
}

fs::path prepare_run_dir(const ExperimentConfig& config, const std::string& command, const json& args,
                         const json& inputs, std::string* run_id) {
  const json key{{"command", command}, {"config", experiment_json(config)}, {"args", args}, {"inputs", inputs}};
  *run_id = config_hash(key).substr(0, kRunIdLength);
  fs::path dir = fs::path(config.out) / command / *run_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

RunResult finish(const fs::path& dir, const std::string& command, const std::string& run_id,
                 const ExperimentConfig& config, json args, json inputs, json outputs, json results) {
  json manifest{{"command", command},
                {"run_id", run_id},
                {"config", to_json(config)},
                {"config_hash", experiment_hash(config)},
                {"seed", config.seed},
                {"args", std::move(args)},
                {"inputs", std::move(inputs)},
                {"outputs", std::move(outputs)},
                {"results", std::move(results)}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return {dir, std::move(manifest)};
}

std::string num(double v) { return fmt::format("{}", v); }

std::string log_csv(const TrainingLog& log) {
  std::string s = "iteration,mean_reward,std_reward,q_loss,g_loss\n";
  for (const auto& r : log) {
    s += fmt::format("{},{},{},{},{}\n", r.iteration, num(r.mean_reward), num(r.std_reward), num(r.q_loss),
                     num(r.g_loss));
  }
  return s;
}

std::string report_csv(const EvalReport& report) {
  std::string s = "episode,return\n";
  for (std::size_t e = 0; e < report.episode_returns.size(); ++e) {
    s += fmt::format("{},{}\n", e, num(report.episode_returns[e]));
  }
  return s;
}

std::string ccdf_csv(const CcdfCurve& curve) {
  std::string s = "snr_db,ccdf\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) s += fmt::format("{},{}\n", num(curve.grid[i]), num(curve.values[i]));
  return s;
}

std::string band_csv(const std::vector<BandRow>& band) {
  std::string s = "x,mean,lo,hi\n";
  for (const auto& r : band) s += fmt::format("{},{},{},{}\n", r.iteration, num(r.mean), num(r.lo), num(r.hi));
  return s;
}

std::string file_token(const std::string& value) {
  std::string out = value;
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    if (!keep) c = '_';
  }
  return out;
}

std::vector<int> expected_dims(const ExperimentConfig& config) {
  std::vector<int> dims{config.network.observation_dim()};
  dims.insert(dims.end(), config.agent.hidden_layers.begin(), config.agent.hidden_layers.end());
  dims.push_back(config.network.num_actions());
  return dims;
}

const nn::DenseNet& checkpoint_net(const nn::Checkpoint& cp, const std::string& name, const ExperimentConfig& config,
                                   nn::Head head, const fs::path& path) {
  const auto it = cp.nets.find(name);
  if (it == cp.nets.end()) throw Error(ErrorKind::Format, path.string() + ": checkpoint has no '" + name + "' net");
  const auto want = expected_dims(config);
  if (it->second.layer_dims() != want || it->second.head() != head) {
    throw Error(ErrorKind::Format, fmt::format("{}: architecture of '{}' [{}] does not match the config [{}]",
                                               path.string(), name, fmt::join(it->second.layer_dims(), ","),
                                               fmt::join(want, ",")));
  }
  return it->second;
}

std::string checkpoint_algo(const nn::Checkpoint& cp, const fs::path& path) {
  if (!cp.meta.contains("algo") || !cp.meta["algo"].is_string()) {
    throw Error(ErrorKind::Format, path.string() + ": checkpoint does not record its algorithm");
  }
  return cp.meta["algo"].get<std::string>();
}

Policy deployed_policy(const BcqAgent& agent, const ExperimentConfig& config) {
  return config.train.deploy_mode == DeployMode::Bcmq ? make_bcmq_policy(agent, config.network)
                                                      : make_bcq_policy(agent);
}

RepeatResult summarize(std::uint64_t seed, TrainingLog log, const EvalReport& report) {
  return {seed, std::move(log), report.mean_return(), report.std_return()};
}

ExperimentConfig seeded(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig c = config;
  c.seed = seed;
  c.train.seed = seed;
  return c;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsageError;
    case ErrorKind::InvalidConfig: return kConfigError;
    case ErrorKind::Format:
    case ErrorKind::TruncatedFile:
    case ErrorKind::VersionMismatch: return kFormatError;
    case ErrorKind::Io: return kIoError;
    default: return kFailure;
  }
}

ExperimentConfig resolve_config(const std::optional<fs::path>& config_path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (config_path) {
    const std::string text = read_text(*config_path);
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvalidConfig, config_path->string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, config_path->string() + ": top level must be an object");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return experiment_from_json(j);
}

std::uint64_t derived_seed(std::uint64_t master, int repeat) { return master ^ static_cast<std::uint64_t>(repeat); }

std::uint64_t deployment_eval_seed(std::uint64_t seed) { return seed ^ kDeploySalt; }

RunResult cmd_gen_data(const ExperimentConfig& config) {
  config.validate();
  const json args{{"policy", to_string(config.dataset.policy)}};
  std::string run_id;
  const fs::path dir = prepare_run_dir(config, "gen-data", args, json::object(), &run_id);
  const auto policy = BehaviorPolicy::make(config.dataset.policy, config.network.num_actions());
  const Dataset ds = generate(config.network, policy, config.dataset.size, config.seed);
  save(ds, dir / "dataset.bin");
  json results{{"n_samples", ds.size()}, {"dataset_hash", file_hash(dir / "dataset.bin")}};
  return finish(dir, "gen-data", run_id, config, args, json::object(), json::array({"dataset.bin"}), results);
}

RunResult cmd_train(const ExperimentConfig& config, const std::string& algo, const std::optional<fs::path>& dataset) {
  config.validate();
  if (algo != "bcq" && algo != "dqn") throw Error(ErrorKind::Usage, "--algo must be bcq or dqn, got '" + algo + "'");
  if (algo == "bcq" && !dataset) throw Error(ErrorKind::Usage, "bcq training needs --dataset");
  if (algo == "dqn" && dataset) throw Error(ErrorKind::Usage, "dqn trains online and takes no --dataset");

  json args{{"algo", algo}};
  json inputs = json::object();
  if (dataset) {
    args["dataset"] = dataset->string();
    inputs["dataset"] = file_hash(*dataset);
  }
  std::string run_id;
  const fs::path dir = prepare_run_dir(config, "train", args, inputs, &run_id);

  const int dim = config.network.observation_dim();
  const int actions = config.network.num_actions();
  const json meta{{"algo", algo}, {"network_hash", config_hash(to_json(config.network))}};
  TrainingLog log;
  EvalReport final_report;
  json results = json::object();
  if (algo == "bcq") {
    const Dataset ds = load(*dataset);
    if (ds.metadata.state_dim != dim || ds.metadata.num_actions != actions) {
      throw Error(ErrorKind::Format, fmt::format("{}: dataset has state_dim {} and {} actions, config expects {} and {}",
                                                 dataset->string(), ds.metadata.state_dim, ds.metadata.num_actions,
                                                 dim, actions));
    }
    auto agent = BcqAgent::create(dim, actions, config.agent, config.network.discount, config.train.learning_rate,
                                  config.train.seed);
    OfflineRunStats stats;
    log = train_offline(agent, ds, config, &stats);
    nn::save_checkpoint(dir / "checkpoint.bin", meta, {{"q", &agent.q}, {"q_target", &agent.q_target}, {"g", &agent.g}});
    final_report = evaluate_policy(deployed_policy(agent, config), config.network, config.eval.episodes,
                                   deployment_eval_seed(config.seed), to_string(config.train.deploy_mode));
    results["training_interactions"] = stats.training_interactions;
  } else {
    auto agent = DqnAgent::create(dim, actions, config.agent, config.network.discount, config.train.learning_rate,
                                  config.train.seed);
    OnlineRunStats stats;
    log = train_online_dqn(agent, config, &stats);
    nn::save_checkpoint(dir / "checkpoint.bin", meta, {{"q", &agent.q}, {"q_target", &agent.q_target}});
    final_report = evaluate_policy(make_dqn_policy(agent), config.network, config.eval.episodes,
                                   deployment_eval_seed(config.seed), "dqn");
    results["training_interactions"] = stats.interactions;
    results["max_replay_size"] = stats.max_replay_size;
  }
  write_text(dir / "log.csv", log_csv(log));
  results["final_mean_reward"] = final_report.mean_return();
  results["final_std_reward"] = final_report.std_return();
  return finish(dir, "train", run_id, config, args, inputs, json::array({"log.csv", "checkpoint.bin"}), results);
}

RunResult cmd_eval(const ExperimentConfig& config, const std::string& mode, const std::optional<fs::path>& checkpoint) {
  config.validate();
  const bool learned = mode == "bcq" || mode == "bcmq" || mode == "dqn";
  if (!learned && mode != "optimal" && mode != "random") {
    throw Error(ErrorKind::Usage, "--mode must be one of bcq, bcmq, dqn, optimal, random; got '" + mode + "'");
  }
  if (learned && !checkpoint) throw Error(ErrorKind::Usage, "--mode " + mode + " needs --checkpoint");
  if (!learned && checkpoint) throw Error(ErrorKind::Usage, "--mode " + mode + " takes no --checkpoint");

  json args{{"mode", mode}};
  json inputs = json::object();
  if (checkpoint) {
    args["checkpoint"] = checkpoint->string();
    inputs["checkpoint"] = file_hash(*checkpoint);
  }
  std::string run_id;
  const fs::path dir = prepare_run_dir(config, "eval", args, inputs, &run_id);

  const std::uint64_t seed = deployment_eval_seed(config.seed);
  const int episodes = config.eval.episodes;
  EvalReport report;
  if (mode == "optimal") {
    report = optimal_reference(config.network, episodes, seed);
  } else if (mode == "random") {
    auto rng = std::make_shared<std::mt19937_64>(config.seed ^ kRandomPolicySalt);
    const int actions = config.network.num_actions();
    Policy random = [rng, actions](std::span<const float>) {
      return std::uniform_int_distribution<int>(0, actions - 1)(*rng);
    };
    report = evaluate_policy(random, config.network, episodes, seed, "random");
  } else {
    const auto cp = nn::load_checkpoint(*checkpoint);
    const std::string algo = checkpoint_algo(cp, *checkpoint);
    const std::string needed = mode == "dqn" ? "dqn" : "bcq";
    if (algo != needed) {
      throw Error(ErrorKind::Usage, fmt::format("--mode {} needs a {} checkpoint, got {}", mode, needed, algo));
    }
    const int dim = config.network.observation_dim();
    const int actions = config.network.num_actions();
    if (algo == "bcq") {
      auto agent = BcqAgent::create(dim, actions, config.agent, config.network.discount, config.train.learning_rate,
                                    config.train.seed);
      agent.q = checkpoint_net(cp, "q", config, nn::Head::Linear, *checkpoint);
      agent.q_target = checkpoint_net(cp, "q_target", config, nn::Head::Linear, *checkpoint);
      agent.g = checkpoint_net(cp, "g", config, nn::Head::LogSoftmax, *checkpoint);
      Policy p = mode == "bcmq" ? make_bcmq_policy(agent, config.network) : make_bcq_policy(agent);
      report = evaluate_policy(p, config.network, episodes, seed, mode);
    } else {
      auto agent = DqnAgent::create(dim, actions, config.agent, config.network.discount, config.train.learning_rate,
                                    config.train.seed);
      agent.q = checkpoint_net(cp, "q", config, nn::Head::Linear, *checkpoint);
      agent.q_target = checkpoint_net(cp, "q_target", config, nn::Head::Linear, *checkpoint);
      report = evaluate_policy(make_dqn_policy(agent), config.network, episodes, seed, mode);
    }
  }
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "ccdf.csv", ccdf_csv(ccdf(report.sinr_db, config.eval.ccdf_resolution_db)));
  const json results{{"mean_return", report.mean_return()},
                     {"std_return", report.std_return()},
                     {"episodes", report.episodes},
                     {"sinr_samples", report.sinr_db.size()},
                     {"discarded_sinr", report.discarded_sinr}};
  return finish(dir, "eval", run_id, config, args, inputs, json::array({"report.csv", "ccdf.csv"}), results);
}

std::vector<std::string> default_sweep_values(const std::string& axis) {
  if (axis == "lr") return {"1e-3", "1e-4", "1e-5"};
  if (axis == "batch_size") return {"20000", "10000", "1000", "100", "50"};
  if (axis == "quality") return {"uniform", "biased"};
  throw Error(ErrorKind::Usage, "--axis must be lr, batch_size or quality; got '" + axis + "'");
}

ExperimentConfig with_axis_value(const ExperimentConfig& config, const std::string& axis, const std::string& value) {
  ExperimentConfig c = config;
  try {
    std::size_t used = 0;
    if (axis == "lr") {
      c.train.learning_rate = std::stod(value, &used);
    } else if (axis == "batch_size") {
      c.dataset.size = std::stoull(value, &used);
    } else if (axis == "quality") {
      c.dataset.policy = behavior_from_string(value);
      used = value.size();
    } else {
      throw Error(ErrorKind::Usage, "--axis must be lr, batch_size or quality; got '" + axis + "'");
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Usage, "bad " + axis + " value '" + value + "'");
  }
  c.validate();
  return c;
}

RepeatResult run_offline_repeat(const ExperimentConfig& config, std::uint64_t seed) {
  const ExperimentConfig c = seeded(config, seed);
  const auto policy = BehaviorPolicy::make(c.dataset.policy, c.network.num_actions());
  const Dataset ds = generate(c.network, policy, c.dataset.size, seed);
  auto agent = BcqAgent::create(c.network.observation_dim(), c.network.num_actions(), c.agent, c.network.discount,
                                c.train.learning_rate, seed);
  TrainingLog log = train_offline(agent, ds, c);
  const auto report = evaluate_policy(deployed_policy(agent, c), c.network, c.eval.episodes,
                                      deployment_eval_seed(seed), to_string(c.train.deploy_mode));
  return summarize(seed, std::move(log), report);
}

RepeatResult run_dqn_repeat(const ExperimentConfig& config, std::uint64_t seed) {
  const ExperimentConfig c = seeded(config, seed);
  auto agent = DqnAgent::create(c.network.observation_dim(), c.network.num_actions(), c.agent, c.network.discount,
                                c.train.learning_rate, seed);
  TrainingLog log = train_online_dqn(agent, c);
  const auto report =
      evaluate_policy(make_dqn_policy(agent), c.network, c.eval.episodes, deployment_eval_seed(seed), "dqn");
  return summarize(seed, std::move(log), report);
}

std::vector<RepeatResult> run_pool(int n, int workers, const std::function<RepeatResult(int)>& job) {
  std::vector<RepeatResult> results(static_cast<std::size_t>(std::max(n, 0)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        results[static_cast<std::size_t>(i)] = job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int width = std::clamp(workers, 1, std::max(n, 1));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < width; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

RunResult cmd_sweep(const ExperimentConfig& config, const std::string& axis, std::vector<std::string> values) {
  config.validate();
  if (values.empty()) values = default_sweep_values(axis);
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_axis_value(config, axis, v));

  const json args{{"axis", axis}, {"values", values}};
  std::string run_id;
  const fs::path dir = prepare_run_dir(config, "sweep", args, json::object(), &run_id);

  const int repeats = config.eval.repeats;
  const int total = static_cast<int>(values.size()) * repeats;
  const auto runs = run_pool(total, config.eval.workers, [&](int job) {
    return run_offline_repeat(configs[static_cast<std::size_t>(job / repeats)], derived_seed(config.seed, job % repeats));
  });

  json outputs = json::array();
  std::string summary = "value,final_mean,final_deviation,final_lo,final_hi\n";
  std::string per_run = "value,repeat,seed,final_mean,final_std\n";
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<TrainingLog> logs;
    std::vector<double> finals;
    for (int r = 0; r < repeats; ++r) {
      const auto& run = runs[v * static_cast<std::size_t>(repeats) + static_cast<std::size_t>(r)];
      logs.push_back(run.log);
      finals.push_back(run.final_mean);
      per_run += fmt::format("{},{},{},{},{}\n", values[v], r, run.seed, num(run.final_mean), num(run.final_std));
    }
    const std::string name = "curve_" + file_token(values[v]) + ".csv";
    write_text(dir / name, band_csv(aggregate_runs(logs)));
    outputs.push_back(name);

    // Same statistics as one band point, applied to the final evaluations.
    std::vector<TrainingLog> finals_as_logs;
    for (double f : finals) finals_as_logs.push_back({LogRow{0, f, 0.0, 0.0, 0.0}});
    const BandRow fin = aggregate_runs(finals_as_logs).front();
    summary += fmt::format("{},{},{},{},{}\n", values[v], num(fin.mean), num(fin.deviation), num(fin.lo), num(fin.hi));
  }
  write_text(dir / "summary.csv", summary);
  write_text(dir / "runs.csv", per_run);
  outputs.push_back("summary.csv");
  outputs.push_back("runs.csv");
  return finish(dir, "sweep", run_id, config, args, json::object(), outputs, json::object());
}

RunResult rerun(const fs::path& manifest_path, const std::optional<std::string>& out) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, manifest_path.string() + ": " + e.what());
  }
  try {
    ExperimentConfig config = experiment_from_json(m.at("config"));
    if (out) config.out = *out;
    const std::string command = m.at("command").get<std::string>();
    const json& args = m.at("args");
    const json& inputs = m.at("inputs");
    auto input_path = [&](const char* key) -> std::optional<fs::path> {
      if (!args.contains(key)) return std::nullopt;
      const fs::path p = args.at(key).get<std::string>();
      if (file_hash(p) != inputs.at(key).get<std::string>()) {
        throw Error(ErrorKind::Format, p.string() + " changed since " + manifest_path.string() + " was written");
      }
      return p;
    };
    if (command == "gen-data") return cmd_gen_data(config);
    if (command == "train") return cmd_train(config, args.at("algo").get<std::string>(), input_path("dataset"));
    if (command == "eval") return cmd_eval(config, args.at("mode").get<std::string>(), input_path("checkpoint"));
    if (command == "sweep") {
      return cmd_sweep(config, args.at("axis").get<std::string>(), args.at("values").get<std::vector<std::string>>());
    }
    throw Error(ErrorKind::Format, manifest_path.string() + ": unknown command '" + command + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, manifest_path.string() + ": " + e.what());
  }
}

}  // namespace bcmq::cli
