#pragma once

#include <cstddef>
#include <functional>

namespace gmap {

/// Global cap on worker threads (default: hardware concurrency).
void set_max_threads(int n);
int max_threads();

/// Runs fn(begin, end) over a static partition of [0, n). Each element is
/// processed exactly once; outputs indexed by element are deterministic for
/// any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace gmap
