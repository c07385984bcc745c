// Copyright (c) 2026 The tpslu Authors
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

#include "tpslu/rng.hpp"

#include <cmath>

namespace tpslu {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t Mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(Mix(Mix(seed + kGolden) ^ Mix(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

CounterRng::CounterRng(std::uint64_t key, std::uint64_t counter, bool)
    : key_(key), counter_(counter) {}

CounterRng::result_type CounterRng::operator()() {
  return Mix(key_ + (++counter_) * kGolden);
}

CounterRng CounterRng::Split(std::uint64_t stream) const {
  return CounterRng(Mix(key_ ^ Mix(stream + 0xD1B54A32D192ED03ULL)), 0, true);
}

std::uint64_t CounterRng::UniformInt(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

double CounterRng::Uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

bool CounterRng::Bernoulli(double p) { return Uniform() < p; }

double CounterRng::Normal() {
  // Box-Muller; u1 is kept away from zero.
  const double u1 = (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double CounterRng::TruncatedNormal(double stddev) {
  double x;
  do {
    x = Normal();
  } while (x < -2.0 || x > 2.0);
  return x * stddev;
}

}  // namespace tpslu
