#pragma once

#include <cstdint>
#include <functional>

namespace elfuse {

/// Worker count: ELFUSE_THREADS when set to a positive integer, otherwise the
/// number of logical cores.
int thread_count();

/// Runs body(i) for i in [0, count). Calls made from inside a running
/// parallel_for execute serially on the calling thread. The first exception
/// thrown by any body is rethrown after all workers finish.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body,
                  int threads = 0);

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `index` derived from `master`; `stream` separates
/// independent uses of the same index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                          std::uint64_t stream = 0);

}  // namespace elfuse
