#pragma once

#include <functional>

#include "manifold_id/types.hpp"

namespace manifold_id {

/// Number of worker threads used by parallel loops. Taken from
/// MANIFOLD_ID_THREADS when set, otherwise the hardware concurrency.
int worker_count();

/// Overrides the worker count for this process; 0 restores the default.
void set_worker_count(int workers);

/// Runs body(chunk, begin, end) over [0, n) split into chunks of `grain`
/// items. Chunk boundaries depend only on (n, grain), never on the number
/// of workers, so any body that writes disjoint outputs per chunk produces
/// identical results for every thread count. The first exception thrown by
/// a body is rethrown on the calling thread.
void parallel_chunks(Index n, Index grain,
                     const std::function<void(Index chunk, Index begin, Index end)>& body);

/// Number of workers parallel_chunks_slotted uses for (n, grain).
int planned_workers(Index n, Index grain);

/// parallel_chunks that also passes the worker slot in [0, planned_workers).
/// Which chunks land in which slot varies between runs, so per-slot state is
/// only safe for order-free reductions such as integer sums.
void parallel_chunks_slotted(Index n, Index grain,
                             const std::function<void(int slot, Index chunk, Index begin, Index end)>& body);

inline Index chunk_count(Index n, Index grain) { return n == 0 ? 0 : (n + grain - 1) / grain; }

}  // namespace manifold_id
