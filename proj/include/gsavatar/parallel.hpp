// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace gsavatar {

/// Worker count from GSAVATAR_THREADS, falling back to hardware concurrency.
std::size_t default_thread_count();

/// Fixed-size pool that runs index ranges. Work is split into chunks whose
/// boundaries depend only on the range size and `grain`, never on the worker
/// count, so any per-chunk reduction merged in chunk order is reproducible
/// bit-for-bit regardless of how many threads ran it.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads = default_thread_count());
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const noexcept { return workers_.size() + 1; }

  /// Calls fn(chunk_index, begin, end) for every chunk of [0, count). Blocks
  /// until all chunks finish. The first exception thrown by any chunk is
  /// rethrown on the calling thread.
  void for_chunks(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

  static std::size_t chunk_count(std::size_t count, std::size_t grain)
  {
    return grain == 0 ? 0 : (count + grain - 1) / grain;
  }

 private:
  void worker_loop();
  void drain(std::size_t generation);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;

  // Current job, guarded by mutex_.
  const std::function<void(std::size_t, std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_count_ = 0;
  std::size_t job_grain_ = 1;
  std::size_t next_chunk_ = 0;
  std::size_t chunks_total_ = 0;
  std::size_t chunks_done_ = 0;
  std::size_t generation_ = 0;
  std::exception_ptr error_;
  bool stopping_ = false;
};

/// Convenience wrapper: fn(begin, end) over [0, count). A null pool runs inline.
template <typename Fn>
void parallel_for(ThreadPool* pool, std::size_t count, std::size_t grain, Fn&& fn)
{
  if (count == 0) {
    return;
  }
  if (pool == nullptr || pool->size() == 1) {
    for (std::size_t begin = 0; begin < count; begin += grain) {
      fn(begin, std::min(count, begin + grain));
    }
    return;
  }
  const std::function<void(std::size_t, std::size_t, std::size_t)> wrapped =
      [&fn](std::size_t, std::size_t begin, std::size_t end) { fn(begin, end); };
  pool->for_chunks(count, grain, wrapped);
}

}  // namespace gsavatar
