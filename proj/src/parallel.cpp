#include "manifold_id/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace manifold_id {

namespace {

std::atomic<int> g_override{0};

int default_workers() {
  if (const char* env = std::getenv("MANIFOLD_ID_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<int>(std::min<long>(v, 1024));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int worker_count() {
  const int o = g_override.load();
  return o > 0 ? o : default_workers();
}

void set_worker_count(int workers) { g_override.store(std::max(workers, 0)); }

int planned_workers(Index n, Index grain) {
  if (n <= 0) return 1;
  const Index chunks = chunk_count(n, std::max<Index>(grain, 1));
  return static_cast<int>(std::max<Index>(1, std::min<Index>(worker_count(), chunks)));
}

void parallel_chunks(Index n, Index grain,
                     const std::function<void(Index, Index, Index)>& body) {
  parallel_chunks_slotted(n, grain, [&](int, Index c, Index begin, Index end) { body(c, begin, end); });
}

void parallel_chunks_slotted(Index n, Index grain,
                             const std::function<void(int, Index, Index, Index)>& body) {
  if (n <= 0) return;
  grain = std::max<Index>(grain, 1);
  const Index chunks = chunk_count(n, grain);
  const int workers = planned_workers(n, grain);

  auto run_chunk = [&](int slot, Index c) { body(slot, c, c * grain, std::min(n, (c + 1) * grain)); };

  if (workers <= 1) {
    for (Index c = 0; c < chunks; ++c) run_chunk(0, c);
    return;
  }

  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<bool> failed{false};

  auto worker = [&](int slot) {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const Index c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        run_chunk(slot, c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace manifold_id
