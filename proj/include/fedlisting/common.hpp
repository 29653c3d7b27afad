// Copyright 2026 The FedListing Authors
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

#ifndef FEDLISTING_COMMON_HPP_
#define FEDLISTING_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedlisting {

// Malformed or truncated on-disk data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that violate a documented precondition or invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. a backward pass fed a cache from a different forward pass.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File system failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer. Used to derive every downstream seed from a base seed
// so that parallel and serial schedules see identical random streams.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// hash(base, tags...) used for hierarchical seed derivation.
inline std::uint64_t DeriveSeed(std::uint64_t base,
                                std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = Mix64(base);
  for (std::uint64_t t : tags) h = Mix64(h ^ Mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

// Stable 64-bit hash of a string tag (FNV-1a), for stage names in seeds.
constexpr std::uint64_t TagHash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

using Rng = std::mt19937_64;

// Worker count: FEDLISTING_THREADS if set and positive, else hardware
// concurrency (at least 1).
std::size_t WorkerCount();

// Runs fn(i) for i in [0, n) on up to WorkerCount() threads. The first
// exception thrown by any task is rethrown after all workers join. Calls made
// from inside a task run serially on that task's thread.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fedlisting

#endif  // FEDLISTING_COMMON_HPP_
