#pragma once

#include <cstddef>
#include <functional>

namespace aoff {

/// Process-wide worker count used by parallel_for. Defaults to 1;
/// the CLI sets it from --threads.
void set_num_threads(int n);
int num_threads();

/// Static contiguous partition of [begin, end) over the configured
/// worker count. The partition depends only on (begin, end, workers),
/// so results that are combined in index order are reproducible for a
/// fixed thread count.
void parallel_for(size_t begin, size_t end, const std::function<void(size_t)>& fn);

/// Same partition, but hands each worker its index range plus a worker
/// id in [0, workers) for per-worker scratch buffers.
void parallel_chunks(size_t begin, size_t end,
                     const std::function<void(size_t chunk_begin, size_t chunk_end,
                                              int worker)>& fn);

}  // namespace aoff
