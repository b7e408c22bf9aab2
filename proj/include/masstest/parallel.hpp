#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>

namespace masstest {

// Worker count used when the caller passes 0: MASSTEST_THREADS if set and
// positive, otherwise the hardware concurrency (at least 1).
int default_thread_count();

// Runs fn(i) for every i in [0, n) on up to `threads` workers (0 = default).
// Each index is visited exactly once; callers write results into per-index
// slots so the outcome never depends on scheduling. The first exception thrown
// by any task is rethrown on the calling thread after all workers stop.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Stable per-task seed: folds each index into the base seed. Used everywhere a
// loop body needs its own RNG stream so that reordering or parallelising loops
// leaves results unchanged.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> indices);

}  // namespace masstest
