// Copyright 2026 The MMX Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmx/log.h"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace mmx::log {
namespace {

Level initial_level() {
  Level l = Level::kWarn;
  if (const char* env = std::getenv("MMX_LOG")) parse_level(env, &l);
  return l;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(initial_level())};
  return lvl;
}

}  // namespace

Level level() { return static_cast<Level>(current().load(std::memory_order_relaxed)); }

void set_level(Level l) { current().store(static_cast<int>(l), std::memory_order_relaxed); }

bool parse_level(const std::string& name, Level* out) {
  if (name == "debug") *out = Level::kDebug;
  else if (name == "info") *out = Level::kInfo;
  else if (name == "warn") *out = Level::kWarn;
  else if (name == "error") *out = Level::kError;
  else if (name == "off") *out = Level::kOff;
  else return false;
  return true;
}

void write(Level l, const std::string& message) {
  static std::mutex mu;
  static const char* kTags[] = {"debug", "info", "warn", "error", "off"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[mmx " << kTags[static_cast<int>(l)] << "] " << message << '\n';
}

}  // namespace mmx::log
