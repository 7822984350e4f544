#pragma once

#include <cstddef>
#include <functional>

namespace gusl {

// Worker count: `requested` if positive, otherwise min(hardware, 4).
int resolve_jobs(int requested);

// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks pulled from
// a shared counter, so results must not depend on execution order; callers that
// reduce must do so over a fixed chunk grid. With jobs <= 1 runs inline.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn);

// Chunked variant: fn(chunk_index, begin, end). The chunk grid is a pure
// function of (n, chunk_size), never of the worker count, so per-chunk partial
// results can be reduced in chunk order deterministically.
void parallel_chunks(size_t n, size_t chunk_size, int jobs,
                     const std::function<void(size_t, size_t, size_t)>& fn);

}  // namespace gusl
