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

#include <stdexcept>
#include <string>

namespace bcmq {

enum class ErrorKind {
  InvalidConfig,
  InvalidInput,
  InvalidState,
  EpisodeFinished,
  SearchTooLarge,
  Format,
  TruncatedFile,
  VersionMismatch,
  EmptySample,
  Io,
  Usage,
};

const char* to_string(ErrorKind kind);

// Every failure surfaced by the library is an Error tagged with its kind, so
// callers (the CLI in particular) can map kinds to exit codes.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid config";
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::InvalidState: return "invalid state";
    case ErrorKind::EpisodeFinished: return "episode finished";
    case ErrorKind::SearchTooLarge: return "search too large";
    case ErrorKind::Format: return "format error";
    case ErrorKind::TruncatedFile: return "truncated file";
    case ErrorKind::VersionMismatch: return "schema version mismatch";
    case ErrorKind::EmptySample: return "empty sample";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

}  // namespace bcmq
