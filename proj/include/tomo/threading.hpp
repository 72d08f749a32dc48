#pragma once

#include <cstdint>
#include <functional>

namespace tomo {

// Caps the number of worker threads used by parallel_for. n < 1 resets to the
// hardware default.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a partition of [0, n) into contiguous ranges, one
// range per worker. Each index is visited exactly once and each range is
// processed sequentially, so gather-style loops (one writer per output
// element) are bit-reproducible for any thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

// Scatter-style loops accumulate into kScatterStripes private buffers that
// are merged in stripe order. The stripe count is fixed, never derived from
// the thread count, so those reductions are bit-reproducible too.
inline constexpr int kScatterStripes = 16;

}  // namespace tomo
