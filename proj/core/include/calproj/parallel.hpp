#pragma once

#include <cstdint>
#include <functional>

namespace calproj {

// splitmix64 finaliser; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
// handed out dynamically; results must be written to per-index slots so the
// outcome does not depend on the schedule. The first exception is rethrown.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

int hardware_threads();

}  // namespace calproj
