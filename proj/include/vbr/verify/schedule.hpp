#pragma once

// Scripted interleaving of a few threads through the named hook points.
// Only available when hooks are compiled in.
//
// Each thread starts parked at "start" and reports "done" when its body
// returns. Steps are processed in order by the coordinator:
//   {t, p, hold}    - wait until thread t parks at hook p (or reaches done)
//   {t, p, proceed} - release thread t from wherever it is parked
// A thread only parks at a hook if its next unprocessed step is a matching
// hold; every other hook it hits passes straight through.

#ifdef VBR_TEST_HOOKS

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "vbr/hooks.hpp"

namespace vbr::verify {

class ScheduleScript {
 public:
  enum class Action { proceed, hold };

  struct Step {
    std::size_t thread;
    std::string point;
    Action action;
  };

  ScheduleScript(std::size_t threads, std::vector<Step> steps)
      : threads_(threads), steps_(std::move(steps)), parked_at_(threads, -1), go_(threads, false),
        done_(threads, false) {}

  /// Runs bodies[t] on thread t under the script. False if a step did not
  /// complete within `timeout`; all threads are released and joined either way.
  bool run(const std::vector<std::function<void()>>& bodies,
           std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    std::vector<std::thread> workers;
    workers.reserve(threads_);
    for (std::size_t t = 0; t < threads_; ++t) {
      workers.emplace_back([this, t, &bodies] {
        Hook h(*this, t);
        hooks::ScopedHandler guard(&h);
        arrive(t, "start");
        if (t < bodies.size() && bodies[t]) bodies[t]();
        std::lock_guard lock(mu_);
        done_[t] = true;
        log_.push_back("t" + std::to_string(t) + " done");
        cv_.notify_all();
      });
    }
    bool ok = true;
    {
      std::unique_lock lock(mu_);
      for (std::size_t i = 0; i < steps_.size() && ok; ++i) {
        const Step& s = steps_[i];
        if (s.action == Action::hold) {
          ok = cv_.wait_for(lock, timeout, [&] {
            return parked_at_[s.thread] == static_cast<long>(i) || (s.point == "done" && done_[s.thread]);
          });
          cursor_ = i + 1;
        } else {
          cursor_ = i + 1;
          go_[s.thread] = true;
          log_.push_back("t" + std::to_string(s.thread) + " proceed " + s.point);
          cv_.notify_all();
        }
      }
      finished_ = true;
      cv_.notify_all();
    }
    for (auto& w : workers) w.join();
    return ok;
  }

  /// Events in the order they happened.
  [[nodiscard]] std::vector<std::string> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

 private:
  struct Hook final : hooks::Handler {
    Hook(ScheduleScript& s, std::size_t t) : script(s), tid(t) {}
    void on_hook(hooks::Point p) override { script.arrive(tid, std::string(hooks::name(p))); }
    ScheduleScript& script;
    std::size_t tid;
  };

  void arrive(std::size_t t, const std::string& point) {
    std::unique_lock lock(mu_);
    if (finished_) return;
    if (point == "start") {
      cv_.wait(lock, [&] { return go_[t] || finished_; });
      go_[t] = false;
      return;
    }
    std::size_t i = cursor_;
    while (i < steps_.size() && steps_[i].thread != t) ++i;
    if (i == steps_.size() || steps_[i].action != Action::hold || steps_[i].point != point) return;
    parked_at_[t] = static_cast<long>(i);
    log_.push_back("t" + std::to_string(t) + " hold " + point);
    cv_.notify_all();
    cv_.wait(lock, [&] { return go_[t] || finished_; });
    go_[t] = false;
    parked_at_[t] = -1;
  }

  std::size_t threads_;
  std::vector<Step> steps_;
  std::vector<long> parked_at_;
  std::vector<bool> go_;
  std::vector<bool> done_;
  std::size_t cursor_ = 0;
  bool finished_ = false;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::string> log_;
};

}  // namespace vbr::verify

#endif
