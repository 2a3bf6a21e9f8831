#pragma once

/// \file race/executor.hpp
/// \brief Static per-thread task lists compiled from a ScheduleTree, a
/// long-lived thread pool, and tree-scoped barriers.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "race/race.hpp"

namespace race {

struct Task {
  enum class Kind : std::uint8_t { run, barrier };
  Kind kind = Kind::run;
  index_t begin = 0;
  index_t end = 0;
  Color color = Color::red;
  int node = 0;  ///< leaf id for run, synchronizing node id for barrier
};

struct Schedule {
  int nthreads = 1;
  int k = 1;
  index_t nrows = 0;
  std::vector<std::vector<Task>> tasks;  ///< per thread, in execution order
  std::vector<int> barrier_size;         ///< per tree node; 0 when the node never synchronizes

  std::size_t barrier_count(int thread) const {
    std::size_t n = 0;
    for (auto& t : tasks.at(static_cast<std::size_t>(thread)))
      if (t.kind == Task::Kind::barrier) ++n;
    return n;
  }
};

namespace detail {

inline void compile_node(const ScheduleTree& tree, int id, int t, std::vector<Task>& out) {
  const auto& n = tree.node(id);
  if (n.leaf()) {
    if (t == n.thread_begin && n.rows() > 0) out.push_back({Task::Kind::run, n.begin, n.end, n.color, id});
    return;
  }
  auto visit = [&](std::size_t parity) {
    for (std::size_t i = parity; i < n.children.size(); i += 2) {
      const auto& c = tree.node(n.children[i]);
      if (t >= c.thread_begin && t < c.thread_begin + c.threads) compile_node(tree, c.id, t, out);
    }
  };
  visit(0);
  if (n.threads > 1) out.push_back({Task::Kind::barrier, 0, 0, Color::red, id});
  visit(1);
}

}  // namespace detail

/// Per-thread task lists: within every node a thread runs its red children,
/// synchronizes with the node's threads, then runs its blue children.
/// Single-threaded nodes need no barrier.
inline Schedule compile(const ScheduleTree& tree) {
  Schedule s;
  s.nthreads = tree.nthreads();
  s.k = tree.k();
  s.nrows = tree.nrows();
  s.tasks.resize(static_cast<std::size_t>(s.nthreads));
  s.barrier_size.assign(tree.nodes().size(), 0);
  if (tree.nodes().empty()) return s;

  index_t cursor = tree.root().begin;
  for (auto id : tree.leaves()) {
    const auto& l = tree.node(id);
    if (l.begin != cursor || l.end < l.begin)
      throw std::invalid_argument("malformed schedule tree: leaf ranges overlap or leave gaps at node " +
                                  std::to_string(id));
    cursor = l.end;
    if (l.thread_begin < 0 || l.thread_begin + l.threads > s.nthreads)
      throw std::invalid_argument("malformed schedule tree: thread range of node " + std::to_string(id));
  }
  if (cursor != tree.root().end) throw std::invalid_argument("malformed schedule tree: leaves do not cover all rows");

  for (auto& n : tree.nodes())
    if (!n.leaf() && n.threads > 1) s.barrier_size[static_cast<std::size_t>(n.id)] = n.threads;
  for (int t = 0; t < s.nthreads; ++t) detail::compile_node(tree, 0, t, s.tasks[static_cast<std::size_t>(t)]);
  return s;
}

/// Reusable rendezvous for a fixed number of threads: counter plus
/// generation. Waiters spin briefly, then block on the generation word.
class ScopedBarrier {
 public:
  explicit ScopedBarrier(int participants, int spin = 2048) : n_(participants), spin_(spin) {}

  void arrive_and_wait() {
    const auto gen = gen_.load(std::memory_order_acquire);
    if (count_.fetch_add(1, std::memory_order_acq_rel) + 1 == n_) {
      count_.store(0, std::memory_order_relaxed);
      gen_.fetch_add(1, std::memory_order_release);
      gen_.notify_all();
      return;
    }
    for (int i = 0; i < spin_; ++i)
      if (gen_.load(std::memory_order_acquire) != gen) return;
    while (gen_.load(std::memory_order_acquire) == gen) gen_.wait(gen, std::memory_order_acquire);
  }

  int participants() const noexcept { return n_; }

 private:
  const int n_;
  const int spin_;
  std::atomic<int> count_{0};
  std::atomic<std::uint32_t> gen_{0};
};

/// THREADS environment variable when set to a positive integer, else
/// `requested`.
inline int resolve_threads(int requested) {
  if (const char* env = std::getenv("THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 4096) return static_cast<int>(v);
  }
  return requested;
}

inline bool pin_current_thread(int core) {
#if defined(__linux__)
  const auto hw = std::thread::hardware_concurrency();
  if (hw == 0) return false;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<unsigned>(core) % hw, &set);
  return pthread_setaffinity_np(pthread_self(), sizeof(set), &set) == 0;
#else
  (void)core;
  return false;
#endif
}

/// Fixed-size pool; the calling thread acts as thread 0. run() dispatches
/// one job to every thread and returns after all have finished.
class ThreadPool {
 public:
  explicit ThreadPool(int nthreads, bool pin = false) : n_(nthreads), errors_(static_cast<std::size_t>(nthreads)) {
    if (nthreads < 1) throw std::invalid_argument("thread pool needs at least one thread");
    if (pin) pin_current_thread(0);
    workers_.reserve(static_cast<std::size_t>(n_ - 1));
    for (int t = 1; t < n_; ++t)
      workers_.emplace_back([this, t, pin] {
        if (pin) pin_current_thread(t);
        worker(t);
      });
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    stop_.store(true, std::memory_order_relaxed);
    gen_.fetch_add(1, std::memory_order_release);
    gen_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const noexcept { return n_; }

  /// Runs fn(tid) on every thread. The first exception thrown by any thread
  /// is rethrown here once the whole team has returned.
  void run(const std::function<void(int)>& fn) {
    std::lock_guard<std::mutex> guard(dispatch_);
    job_ = &fn;
    for (auto& e : errors_) e = nullptr;
    pending_.store(n_ - 1, std::memory_order_relaxed);
    gen_.fetch_add(1, std::memory_order_release);
    gen_.notify_all();
    invoke(0);
    int left;
    while ((left = pending_.load(std::memory_order_acquire)) != 0) pending_.wait(left, std::memory_order_acquire);
    job_ = nullptr;
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void invoke(int t) {
    try {
      (*job_)(t);
    } catch (...) {
      errors_[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }

  void worker(int t) {
    std::uint32_t seen = 0;
    while (true) {
      std::uint32_t g;
      while ((g = gen_.load(std::memory_order_acquire)) == seen) gen_.wait(seen, std::memory_order_acquire);
      seen = g;
      if (stop_.load(std::memory_order_relaxed)) return;
      invoke(t);
      if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) pending_.notify_one();
    }
  }

  const int n_;
  std::vector<std::thread> workers_;
  std::vector<std::exception_ptr> errors_;
  const std::function<void(int)>* job_ = nullptr;
  std::atomic<std::uint32_t> gen_{0};
  std::atomic<int> pending_{0};
  std::atomic<bool> stop_{false};
  std::mutex dispatch_;
};

struct ExecutorOptions {
  bool pin = false;
  bool trace = false;
};

struct TraceEvent {
  int thread = 0;
  int task = 0;  ///< index into the thread's task list
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

/// Runs per-range kernels following a compiled Schedule on a dedicated pool.
class Executor {
 public:
  explicit Executor(Schedule schedule, ExecutorOptions opt = {})
      : schedule_(std::move(schedule)), opt_(opt), pool_(schedule_.nthreads, opt.pin),
        global_(schedule_.nthreads), trace_(static_cast<std::size_t>(schedule_.nthreads)) {
    barriers_.resize(schedule_.barrier_size.size());
    for (std::size_t i = 0; i < barriers_.size(); ++i)
      if (schedule_.barrier_size[i] > 0) barriers_[i] = std::make_unique<ScopedBarrier>(schedule_.barrier_size[i]);
  }

  const Schedule& schedule() const noexcept { return schedule_; }
  int nthreads() const noexcept { return schedule_.nthreads; }
  ThreadPool& pool() noexcept { return pool_; }

  /// kernel(begin, end) or kernel(begin, end, thread) per run task.
  template <class Kernel>
  void execute(Kernel&& kernel) {
    execute_impl(nullptr, kernel);
  }

  /// prologue(thread, nthreads) runs on every thread, followed by a global
  /// barrier, before the schedule starts.
  template <class Prologue, class Kernel>
  void execute(Prologue&& prologue, Kernel&& kernel) {
    std::function<void(int, int)> pro = prologue;
    execute_impl(&pro, kernel);
  }

  /// Trace of the last execute call (empty unless enabled).
  std::vector<TraceEvent> trace() const {
    std::vector<TraceEvent> all;
    for (auto& t : trace_) all.insert(all.end(), t.begin(), t.end());
    return all;
  }

  void write_trace_csv(std::ostream& os) const {
    os << "thread,task,start,end\n";
    for (auto& e : trace()) os << e.thread << ',' << e.task << ',' << e.start_ns << ',' << e.end_ns << '\n';
  }

 private:
  template <class Kernel>
  void execute_impl(const std::function<void(int, int)>* prologue, Kernel& kernel) {
    std::atomic<bool> failed{false};
    const auto t0 = std::chrono::steady_clock::now();
    auto now_ns = [&] {
      return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
    };
    pool_.run([&](int tid) {
      std::exception_ptr err;
      auto& tr = trace_[static_cast<std::size_t>(tid)];
      tr.clear();
      if (prologue) {
        try {
          (*prologue)(tid, schedule_.nthreads);
        } catch (...) {
          err = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
        if (schedule_.nthreads > 1) global_.arrive_and_wait();
      }
      const auto& tasks = schedule_.tasks[static_cast<std::size_t>(tid)];
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& task = tasks[i];
        if (task.kind == Task::Kind::barrier) {
          barriers_[static_cast<std::size_t>(task.node)]->arrive_and_wait();
          continue;
        }
        if (failed.load(std::memory_order_relaxed)) continue;
        const auto start = opt_.trace ? now_ns() : 0;
        try {
          if constexpr (std::is_invocable_v<Kernel&, index_t, index_t, int>)
            kernel(task.begin, task.end, tid);
          else
            kernel(task.begin, task.end);
        } catch (...) {
          if (!err) err = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
        if (opt_.trace) tr.push_back({tid, static_cast<int>(i), start, now_ns()});
      }
      if (err) std::rethrow_exception(err);
    });
  }

  Schedule schedule_;
  ExecutorOptions opt_;
  ThreadPool pool_;
  ScopedBarrier global_;
  std::vector<std::unique_ptr<ScopedBarrier>> barriers_;
  std::vector<std::vector<TraceEvent>> trace_;
};

/// One-shot execution. `threads` must match the schedule.
template <class Kernel>
void execute(const Schedule& schedule, Kernel&& kernel, int threads, ExecutorOptions opt = {}) {
  if (threads != schedule.nthreads)
    throw std::invalid_argument("thread count " + std::to_string(threads) + " does not match schedule (" +
                                std::to_string(schedule.nthreads) + ")");
  Executor ex(schedule, opt);
  ex.execute(std::forward<Kernel>(kernel));
}

}  // namespace race
