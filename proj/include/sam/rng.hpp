// Copyright 2026 The samgar Authors. All Rights Reserved.
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
#include <initializer_list>
#include <random>
#include <vector>

namespace sam {

using Rng = std::mt19937_64;

/// Independent generator keyed by a tuple of integers, e.g. (seed, split, index).
inline Rng derive_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2);
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stream tags so that different consumers of one seed never share a stream.
namespace stream {
inline constexpr std::uint64_t prototypes = 0x70726f746fULL;
inline constexpr std::uint64_t labels = 0x6c6162656cULL;
inline constexpr std::uint64_t sample = 0x73616d706cULL;
inline constexpr std::uint64_t init = 0x696e6974ULL;
inline constexpr std::uint64_t shuffle = 0x73687566ULL;
inline constexpr std::uint64_t frames = 0x6672616dULL;
}  // namespace stream

}  // namespace sam
