/*
 * Copyright 2026 The LLG Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LLG_RNG_H_
#define LLG_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace llg {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// indices, e.g. DeriveSeed(master, {cell, trial}).
constexpr uint64_t DeriveSeed(uint64_t master, std::initializer_list<uint64_t> path) {
  uint64_t h = Mix64(master);
  for (uint64_t p : path) h = Mix64(h ^ Mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng MakeRng(uint64_t master, std::initializer_list<uint64_t> path) {
  return Rng(DeriveSeed(master, path));
}

}  // namespace llg

#endif  // LLG_RNG_H_
