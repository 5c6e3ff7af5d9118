// Copyright 2026 The riskdiff Authors
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

#ifndef RISKDIFF__UTIL__RNG_HPP_
#define RISKDIFF__UTIL__RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace riskdiff
{

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL)
{
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded generator. Every random draw in the library goes through one of
/// these, derived from a root seed by name so that runs are reproducible.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
  : engine_(seed)
  {
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  /// Inclusive on both ends.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
  {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return uniform_(engine_) < p; }
  /// Fisher-Yates.
  template <class V>
  void shuffle(V & v)
  {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }
  std::mt19937_64 & engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Named sub-stream of a root seed: (root, name, indices...) -> independent Rng.
inline std::uint64_t substream_seed(
  std::uint64_t root, std::string_view name, std::span<const std::uint64_t> indices)
{
  std::uint64_t h = splitmix64(root ^ fnv1a(name));
  for (std::uint64_t i : indices) {
    h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  }
  return h;
}

inline std::uint64_t substream_seed(
  std::uint64_t root, std::string_view name, std::initializer_list<std::uint64_t> indices = {})
{
  return substream_seed(root, name, std::span<const std::uint64_t>(indices.begin(), indices.size()));
}

inline Rng substream(
  std::uint64_t root, std::string_view name, std::span<const std::uint64_t> indices)
{
  return Rng(substream_seed(root, name, indices));
}

inline Rng substream(
  std::uint64_t root, std::string_view name, std::initializer_list<std::uint64_t> indices = {})
{
  return Rng(substream_seed(root, name, indices));
}

}  // namespace riskdiff

#endif  // RISKDIFF__UTIL__RNG_HPP_
