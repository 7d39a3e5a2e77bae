// Copyright 2026 The softbridge Authors
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

#ifndef SOFTBRIDGE_RNG_HPP_
#define SOFTBRIDGE_RNG_HPP_

#include <cstdint>
#include <string_view>

namespace softbridge {

/*
 * Counter-based generator. Output i of a stream with key k is
 *
 *   mix64(k + i * 0x9E3779B97F4A7C15),  i = 1, 2, ...
 *
 * where mix64 is the SplitMix64 finalizer. A stream seeded with key k is
 * therefore bit-identical to SplitMix64 started from state k. Derived
 * streams use key' = mix64(key ^ mix64(stream_id + 0xD1B54A32D192ED03)), so
 * adding a new consumer never shifts the draws of an existing one.
 *
 * uniform()  = (next_u64() >> 11) * 2^-53                 in [0, 1)
 * normal()   = Box-Muller on u1 = 1 - uniform(), u2 = uniform(); the cosine
 *              branch is returned first and the sine branch is cached.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(seed) {}

  static std::uint64_t mix64(std::uint64_t x);

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n) via 128-bit multiply-high.
  std::uint64_t below(std::uint64_t n);

  // Independent child stream; does not advance this stream.
  Rng split(std::uint64_t stream_id) const;
  Rng split(std::string_view name) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// FNV-1a over the bytes of a name; used to turn stream names into ids.
std::uint64_t stream_id(std::string_view name);

}  // namespace softbridge

#endif  // SOFTBRIDGE_RNG_HPP_
