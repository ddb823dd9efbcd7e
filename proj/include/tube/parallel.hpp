#pragma once

#include <cstdint>
#include <functional>
#include <random>

namespace tube {

using Rng = std::mt19937_64;

/// Independent stream for (seed, index); identical at any thread count.
Rng derive_rng(std::uint64_t seed, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Runs body(0..count-1) on up to `threads` workers (0 = hardware
/// concurrency). Results must be written by index. The first exception
/// thrown by any body is rethrown after all workers stop.
void parallel_for(long count, int threads, const std::function<void(long)>& body);

}  // namespace tube
