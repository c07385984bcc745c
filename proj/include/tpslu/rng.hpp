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

#ifndef TPSLU_RNG_HPP_
#define TPSLU_RNG_HPP_

#include <cstdint>
#include <limits>

namespace tpslu {

// Counter-based generator: the n-th draw is a pure function of (key, n), and
// child streams are derived from (key, stream id). Sampling helpers are
// implemented here rather than with <random> distributions so that streams
// are bit-identical across standard library implementations.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  // Independent stream keyed by this generator's key and `stream`; does not
  // advance this generator.
  CounterRng Split(std::uint64_t stream) const;

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  // Uniform double in [0, 1).
  double Uniform();
  bool Bernoulli(double p);
  double Normal();
  // Standard normal truncated to [-2, 2], scaled by stddev.
  double TruncatedNormal(double stddev);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  CounterRng(std::uint64_t key, std::uint64_t counter, bool);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tpslu

#endif  // TPSLU_RNG_HPP_
