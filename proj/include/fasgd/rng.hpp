// Copyright 2026 The fasgd-sim Authors. All Rights Reserved.
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
#include <string>
#include <string_view>
#include <utility>

namespace fasgd {

// Counter-addressable random stream.
//
// Draw k of stream (seed, label) is
//
//   key   = mix64(seed ^ fnv1a64(label))
//   u64_k = mix64(key + (k + 1) * 0x9E3779B97F4A7C15)
//   u_k   = (u64_k >> 11) * 2^-53                       in [0, 1)
//
// where mix64 is the SplitMix64 finalizer and fnv1a64 the 64-bit FNV-1a
// hash. Every draw is a pure function of (seed, label, k), so streams with
// different labels never share state and the sequence is identical on every
// platform.
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  RngStream(std::uint64_t seed, std::string label)
      : seed_(seed), label_(std::move(label)), key_(mix64(seed ^ fnv1a64(label_))) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  // Raw 64-bit value at index k; does not advance the stream.
  std::uint64_t bits_at(std::uint64_t k) const noexcept { return mix64(key_ + (k + 1) * kGamma); }

  // Uniform double in [0,1) at index k; does not advance the stream.
  double uniform_at(std::uint64_t k) const noexcept {
    return static_cast<double>(bits_at(k) >> 11) * 0x1.0p-53;
  }

  double next_uniform() noexcept { return uniform_at(counter_++); }

  std::uint64_t next_bits() noexcept { return bits_at(counter_++); }

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream labels used by the simulator.
namespace stream_label {
inline constexpr const char* kInit = "init";
inline constexpr const char* kData = "data";
inline constexpr const char* kDispatch = "dispatch";
inline constexpr const char* kDrop = "drop";
}  // namespace stream_label

}  // namespace fasgd
