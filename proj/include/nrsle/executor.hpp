#pragma once

#include <cstddef>
#include <functional>

namespace nrsle {

/// Task-submission interface handed to the computational modules.
///
/// `for_each(count, task)` must invoke `task(i)` exactly once for every
/// i in [0, count) and return only when all invocations have finished.
/// Tasks write to disjoint slots, so no ordering guarantee is needed; every
/// reduction downstream is done sequentially in index order, which keeps
/// results independent of the worker count.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual void for_each(std::size_t count, const std::function<void(std::size_t)>& task) = 0;
  virtual std::size_t workers() const = 0;
};

class SerialExecutor final : public Executor {
 public:
  void for_each(std::size_t count, const std::function<void(std::size_t)>& task) override {
    for (std::size_t i = 0; i < count; ++i) task(i);
  }
  std::size_t workers() const override { return 1; }
};

/// Fixed pool of worker threads; indices are handed out dynamically.
class ThreadPoolExecutor final : public Executor {
 public:
  /// threads == 0 picks std::thread::hardware_concurrency().
  explicit ThreadPoolExecutor(std::size_t threads = 0);
  void for_each(std::size_t count, const std::function<void(std::size_t)>& task) override;
  std::size_t workers() const override { return threads_; }

 private:
  std::size_t threads_;
};

/// Process-wide serial fallback used when callers pass no executor.
Executor& serial_executor();

}  // namespace nrsle
