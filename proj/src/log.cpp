// Copyright 2026 The Selex Authors.
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

#include "selex/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace selex {
namespace {

std::mutex g_mutex;
WarningSink g_sink;
std::atomic<bool> g_verbose{false};

}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(g_mutex);
  std::swap(g_sink, sink);
  return sink;
}

void warn(const std::string& message) {
  std::lock_guard lock(g_mutex);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_verbose(bool verbose) { g_verbose = verbose; }

void info(const std::string& message) {
  if (!g_verbose) return;
  std::lock_guard lock(g_mutex);
  std::cerr << message << '\n';
}

}  // namespace selex
