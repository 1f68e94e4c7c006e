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


#include "bcmq/container.hpp"
#include "bcmq/dataset.hpp"

#include "helpers.hpp"

#include <fstream>
#include <iterator>
#include <set>

using namespace bcmq;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("uniform behavior data") {
  NetworkConfig c;
  const auto ds = generate(c, BehaviorPolicy::uniform(16), 20000, 42);
  REQUIRE(ds.size() == 20000);
  CHECK(ds.metadata.policy == BehaviorKind::Uniform);
  CHECK(ds.metadata.seed == 42);
  CHECK(ds.metadata.state_dim == 8);
  CHECK(ds.metadata.num_actions == 16);
  std::vector<int> counts(16, 0);
  for (const auto& t : ds.transitions) counts[static_cast<std::size_t>(t.action)]++;
  for (int n : counts) {
    const double freq = n / 20000.0;
    CHECK(freq >= 0.04);
    CHECK(freq <= 0.085);
  }
  // every T-th transition closes an episode
  for (std::size_t i = 0; i < 200; ++i) CHECK(ds.transitions[i].done == ((i + 1) % 20 == 0));
  for (const auto& t : ds.transitions) {
    CHECK(t.reward >= -50.0f);
    CHECK(t.reward <= 200.0f);
    CHECK(t.state.size() == 8);
    CHECK(t.next_state.size() == 8);
  }
}

TEST_CASE("biased behavior data stays on its support") {
  NetworkConfig c;
  const auto policy = BehaviorPolicy::biased(16);
  CHECK(policy.support() == std::vector<int>{0, 1, 2, 3});
  CHECK(BehaviorPolicy::biased(5).support().size() == 2);
  const auto ds = generate(c, policy, 2000, 3);
  std::set<int> seen;
  for (const auto& t : ds.transitions) seen.insert(t.action);
  CHECK(seen == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("generation is deterministic") {
  NetworkConfig c;
  const auto a = generate(c, BehaviorPolicy::uniform(16), 300, 9);
  const auto b = generate(c, BehaviorPolicy::uniform(16), 300, 9);
  const auto other = generate(c, BehaviorPolicy::uniform(16), 300, 10);
  CHECK(a == b);
  CHECK_FALSE(a == other);
  // a shorter run is a prefix of a longer one with the same seed
  const auto prefix = generate(c, BehaviorPolicy::uniform(16), 100, 9);
  for (std::size_t i = 0; i < 100; ++i) CHECK(prefix.transitions[i] == a.transitions[i]);
  CHECK_ERROR_KIND(generate(c, BehaviorPolicy::uniform(16), 0, 9), ErrorKind::InvalidInput);
}

TEST_CASE("stored rewards replay exactly from their channel seeds") {
  NetworkConfig c;
  const auto ds = generate(c, BehaviorPolicy::uniform(16), 2000, 77);
  for (std::size_t i = 0; i < ds.size(); i += 7) {
    const auto& t = ds.transitions[i];
    CHECK(static_cast<float>(replay_reward(t, c)) == t.reward);
  }
}

TEST_CASE("save and load") {
  const auto dir = testutil::scratch_dir("dataset_io");
  NetworkConfig c;
  const auto ds = generate(c, BehaviorPolicy::biased(16), 500, 5);
  save(ds, dir / "d.bin");
  CHECK(load(dir / "d.bin") == ds);

  // same content twice gives the same bytes
  save(ds, dir / "d2.bin");
  CHECK(slurp(dir / "d.bin") == slurp(dir / "d2.bin"));

  const std::string bytes = slurp(dir / "d.bin");
  spit(dir / "short.bin", bytes.substr(0, bytes.size() - 10));
  CHECK_ERROR_KIND(load(dir / "short.bin"), ErrorKind::TruncatedFile);
  spit(dir / "stub.bin", bytes.substr(0, 6));
  CHECK_ERROR_KIND(load(dir / "stub.bin"), ErrorKind::TruncatedFile);

  std::string versioned = bytes;
  const auto at = versioned.find("\"schema_version\":1");
  REQUIRE(at != std::string::npos);
  versioned[at + 17] = '7';
  spit(dir / "v.bin", versioned);
  CHECK_ERROR_KIND(load(dir / "v.bin"), ErrorKind::VersionMismatch);

  std::string magic = bytes;
  magic[0] = 'X';
  spit(dir / "m.bin", magic);
  CHECK_ERROR_KIND(load(dir / "m.bin"), ErrorKind::Format);

  std::string header = bytes;
  header[9] = '#';
  spit(dir / "h.bin", header);
  CHECK_ERROR_KIND(load(dir / "h.bin"), ErrorKind::Format);

  spit(dir / "extra.bin", bytes + "zz");
  CHECK_ERROR_KIND(load(dir / "extra.bin"), ErrorKind::Format);

  container::write(dir / "other.bin", {{"kind", "checkpoint"}}, {});
  CHECK_ERROR_KIND(load(dir / "other.bin"), ErrorKind::Format);
  CHECK_ERROR_KIND(load(dir / "missing.bin"), ErrorKind::Io);
  std::filesystem::remove_all(dir);
}

TEST_CASE("minibatch sampling") {
  NetworkConfig c;
  const auto ds = generate(c, BehaviorPolicy::uniform(16), 64, 1);
  std::mt19937_64 r1(5), r2(5);
  const auto a = sample_minibatch(ds, 32, r1);
  const auto b = sample_minibatch(ds, 32, r2);
  CHECK(a.size() == 32);
  CHECK(a == b);
  std::mt19937_64 r3(6);
  const auto idx = sample_indices(64, 64, r3);
  CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() < 64);
  CHECK_ERROR_KIND(sample_indices(0, 1, r3), ErrorKind::InvalidInput);
  CHECK_ERROR_KIND(sample_indices(64, 0, r3), ErrorKind::InvalidInput);
  CHECK_ERROR_KIND(sample_indices(64, 65, r3), ErrorKind::InvalidInput);

  const auto mb = gather(ds.transitions, {3, 3, 10});
  CHECK(mb.size() == 3);
  CHECK(mb.states.rows() == 8);
  CHECK(mb.states.cols() == 3);
  CHECK(mb.actions[0] == ds.transitions[3].action);
  CHECK(mb.rewards[2] == static_cast<double>(ds.transitions[10].reward));
  CHECK(mb.next_states(7, 2) == static_cast<double>(ds.transitions[10].next_state[7]));
}

}
