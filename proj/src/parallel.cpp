// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include "gsavatar/parallel.hpp"

#include <cstdlib>
#include <string>

namespace gsavatar {

std::size_t default_thread_count()
{
  if (const char* env = std::getenv("GSAVATAR_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value >= 1) {
        return static_cast<std::size_t>(value);
      }
    } catch (const std::exception&) {
      // fall through to hardware default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

ThreadPool::ThreadPool(std::size_t threads)
{
  const std::size_t extra = threads > 1 ? threads - 1 : 0;
  workers_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

ThreadPool::~ThreadPool()
{
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& worker : workers_) {
    worker.join();
  }
}

void ThreadPool::drain(std::size_t generation)
{
  std::unique_lock lock(mutex_);
  while (generation_ == generation && next_chunk_ < chunks_total_) {
    const std::size_t chunk = next_chunk_++;
    const auto* job = job_;
    const std::size_t begin = chunk * job_grain_;
    const std::size_t end = std::min(job_count_, begin + job_grain_);
    lock.unlock();
    std::exception_ptr failure;
    try {
      (*job)(chunk, begin, end);
    } catch (...) {
      failure = std::current_exception();
    }
    lock.lock();
    if (failure && !error_) {
      error_ = failure;
    }
    if (++chunks_done_ == chunks_total_) {
      done_.notify_all();
    }
  }
}

void ThreadPool::worker_loop()
{
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || (generation_ != seen && next_chunk_ < chunks_total_); });
      if (stopping_) {
        return;
      }
      seen = generation_;
    }
    drain(seen);
  }
}

void ThreadPool::for_chunks(std::size_t count, std::size_t grain,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn)
{
  if (grain == 0) {
    grain = 1;
  }
  std::size_t generation = 0;
  {
    std::lock_guard lock(mutex_);
    job_ = &fn;
    job_count_ = count;
    job_grain_ = grain;
    next_chunk_ = 0;
    chunks_total_ = chunk_count(count, grain);
    chunks_done_ = 0;
    error_ = nullptr;
    generation = ++generation_;
  }
  wake_.notify_all();
  drain(generation);

  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return chunks_done_ == chunks_total_; });
  job_ = nullptr;
  if (error_) {
    auto failure = error_;
    error_ = nullptr;
    std::rethrow_exception(failure);
  }
}

}  // namespace gsavatar
