// Copyright 2026 The AVLoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

#include "avloc/types.hpp"

namespace avloc {

// splitmix64 step. Used both as a sequential generator and as an avalanche
// hash for counter-based streams, so results do not depend on libstdc++
// distribution internals and are stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t x) { return splitmix64(x); }

// Combines stream identifiers (seed, epoch, step, pair indices, ...) into a
// single substream key.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t key = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) key = mix64(key ^ mix64(p));
  return key;
}

// Sequential generator over splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  // Fisher-Yates, stable across platforms (std::shuffle is not).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Counter-based uniform in (0, 1): element i of the stream named by `key`.
// Stateless, so noise fields can be regenerated from their key alone.
inline double counter_unit(std::uint64_t key, std::uint64_t index) {
  std::uint64_t x = mix64(key ^ mix64(index + 0x9e3779b97f4a7c15ULL));
  double u = static_cast<double>(x >> 11) * 0x1.0p-53;
  // Keep strictly inside (0, 1) so log(u) and log(1-u) stay finite.
  constexpr double kTiny = 1e-12;
  if (u < kTiny) u = kTiny;
  if (u > 1.0 - kTiny) u = 1.0 - kTiny;
  return u;
}

// Seeded matrix with i.i.d. uniform entries in [lo, hi).
template <typename Scalar>
Mat<Scalar> seeded_uniform(std::uint64_t seed, Eigen::Index rows,
                           Eigen::Index cols, double lo, double hi) {
  Rng rng(seed);
  Mat<Scalar> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<Scalar>(rng.next_uniform(lo, hi));
  return m;
}

// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
Mat<Scalar> seeded_fan_in(std::uint64_t seed, Eigen::Index rows,
                          Eigen::Index cols) {
  const double a = 1.0 / std::sqrt(static_cast<double>(cols));
  return seeded_uniform<Scalar>(seed, rows, cols, -a, a);
}

// 64-bit FNV-1a over raw bytes; used for the frozen-backend hash checks.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename Scalar>
std::uint64_t hash_matrix(const Mat<Scalar>& m, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()), h);
}

}  // namespace avloc
