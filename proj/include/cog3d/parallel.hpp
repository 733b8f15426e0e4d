#pragma once

#include <cstddef>
#include <functional>

namespace cog3d {

// Number of worker threads used for intra-step parallelism. Defaults to the
// hardware concurrency; the COG3DMAP_THREADS environment variable caps it.
std::size_t worker_count();

// Runs fn(begin, end) over disjoint chunks of [0, n). Falls back to a single
// inline call for small n or when only one worker is configured. Callers must
// only write to disjoint, index-owned slots so results do not depend on the
// schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace cog3d
