#pragma once

#include <cstddef>
#include <functional>

namespace fexp {

// Worker-thread budget: FEXP_THREADS if set, otherwise hardware concurrency.
int worker_threads();

// Runs fn(begin, end) over [0,n) split into chunks of at most `grain`
// elements. Chunk boundaries depend only on n and grain, never on the thread
// count, so any floating-point reduction done per chunk and combined in chunk
// order is reproducible under any FEXP_THREADS setting.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace fexp
