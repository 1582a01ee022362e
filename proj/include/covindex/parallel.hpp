#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace covindex {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

/// Worker count: COVINDEX_THREADS if set and positive, else hardware
/// concurrency (at least one).
std::size_t worker_count();

/// Runs body(i) for i in [0, count). Tasks are independent; callers write
/// results into slot i so the merged output does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace covindex
