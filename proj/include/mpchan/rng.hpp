// SPDX-License-Identifier: Apache-2.0
//
// mpchan: multipath MIMO channel synthesis, estimation, and characterization
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace mpchan {

/// Counter-based PRNG (Philox 4x32-10). Draws are a pure function of
/// (seed, stream, counter), so independent workers can generate
/// non-overlapping, reproducible streams without shared state.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Uniform double in [0, 1).
    double uniform();
    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    /// Circularly-symmetric complex normal, unit variance (0.5 per component).
    std::complex<double> complex_normal();

    /// Raw 4x32 Philox block at the current counter; advances the counter.
    std::array<std::uint32_t, 4> next_block();

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int block_pos_ = 4;         // consumed
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;

    std::uint32_t next_u32();
};

/// Mixes a position/realization index into a per-task stream id so batch
/// workers derive disjoint Philox streams from one campaign seed.
std::uint64_t derive_stream(std::uint64_t base, std::uint64_t index);

} // namespace mpchan
