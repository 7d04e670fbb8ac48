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

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace selex {

// Seeded generator with distribution helpers whose output is fixed by the
// seed alone. The standard distributions are implementation-defined, so
// everything that feeds exported or cached artifacts goes through here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // Draws `count` distinct elements of `items` uniformly without
  // replacement, returned in draw order.
  template <typename T>
  std::vector<T> sample(std::span<const T> items, std::size_t count) {
    std::vector<T> pool(items.begin(), items.end());
    if (count > pool.size()) count = pool.size();
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t j = i + uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);

// Mixes a global seed with a string key (e.g. a doc id) into a child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

}  // namespace selex
