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
#include "bcmq/env.hpp"
#include "bcmq/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>
#include <unistd.h>

namespace testutil {

// Scratch directory unique to this process and tag, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("bcmq_unit_" + std::to_string(::getpid()) + "_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Expects `expr` to throw bcmq::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                      \
  do {                                                             \
    bool thrown_ = false;                                          \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const bcmq::Error& e_) {                              \
      thrown_ = true;                                              \
      CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());      \
    }                                                              \
    CHECK_MESSAGE(thrown_, "expected bcmq::Error from " #expr);    \
  } while (0)

// A small, quick experiment for end-to-end tests.
inline bcmq::ExperimentConfig quick_experiment() {
  bcmq::ExperimentConfig c;
  c.train.max_iterations = 200;
  c.train.eval_every = 100;
  c.train.eval_episodes = 5;
  c.dataset.size = 400;
  c.eval.episodes = 10;
  c.eval.repeats = 2;
  return c;
}

}  // namespace testutil
