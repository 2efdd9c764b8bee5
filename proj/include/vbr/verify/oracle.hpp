#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <set>
#include <vector>

#include "vbr/types.hpp"

namespace vbr::verify {

/// Single-threaded reference model of an integer set.
class OracleSet {
 public:
  bool add(Key k) { return keys_.insert(k).second; }
  bool remove(Key k) { return keys_.erase(k) != 0; }
  [[nodiscard]] bool contains(Key k) const { return keys_.count(k) != 0; }
  [[nodiscard]] std::size_t size() const noexcept { return keys_.size(); }
  [[nodiscard]] std::vector<Key> keys() const { return {keys_.begin(), keys_.end()}; }

 private:
  std::set<Key> keys_;
};

enum class OpKind : char { add = 'a', remove = 'r', contains = 'c' };

struct TraceEntry {
  std::uint32_t thread;
  OpKind op;
  Key key;
  bool ok;
  std::uint64_t ts;
};

/// Append-only per-thread operation log with a shared logical clock.
/// Each thread appends only to its own buffer.
class OpTrace {
 public:
  explicit OpTrace(std::size_t threads) : per_thread_(threads) {}

  void record(std::size_t thread, OpKind op, Key key, bool ok) {
    const std::uint64_t ts = clock_.fetch_add(1, std::memory_order_relaxed);
    per_thread_[thread].push_back(TraceEntry{static_cast<std::uint32_t>(thread), op, key, ok, ts});
  }

  /// All entries in timestamp order. Quiescent only.
  [[nodiscard]] std::vector<TraceEntry> merged() const {
    std::vector<TraceEntry> all;
    for (const auto& v : per_thread_) all.insert(all.end(), v.begin(), v.end());
    std::sort(all.begin(), all.end(), [](const TraceEntry& a, const TraceEntry& b) { return a.ts < b.ts; });
    return all;
  }

  [[nodiscard]] std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& v : per_thread_) n += v.size();
    return n;
  }

  /// One op per line: t=<id> op=<a|r|c> k=<key> ok=<0|1> ts=<n>
  void dump(std::ostream& os) const {
    for (const auto& e : merged()) {
      os << "t=" << e.thread << " op=" << static_cast<char>(e.op) << " k=" << e.key
         << " ok=" << (e.ok ? 1 : 0) << " ts=" << e.ts << '\n';
    }
  }

 private:
  std::vector<std::vector<TraceEntry>> per_thread_;
  std::atomic<std::uint64_t> clock_{0};
};

}  // namespace vbr::verify
