#pragma once

#include <cstddef>
#include <functional>

namespace hieum {

// Worker count used by the engine; 1 gives strictly sequential execution.
void set_threads(int threads);
int threads();

// Runs body(begin, end) over a static partition of [0, n). Partitions are
// disjoint, so results are identical for any thread count as long as the body
// only writes inside its own range.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace hieum
