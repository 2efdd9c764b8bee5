#pragma once

// Debug recorder for the per-slot reclamation invariants. Attach one to a
// domain to have every alloc/mark/retire/link-write checked; it is never
// consulted when detached.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "vbr/types.hpp"

namespace vbr {

enum class SlotState : std::uint8_t { free, allocated, marked, retired, sentinel };

class InvariantMonitor {
 public:
  explicit InvariantMonitor(std::size_t capacity)
      : slots_(std::make_unique<Record[]>(capacity)), capacity_(capacity) {}

  void on_sentinel(slot_id s, epoch_t birth) {
    Record& r = slots_[s];
    r.birth.store(birth, std::memory_order_relaxed);
    r.state.store(SlotState::sentinel, std::memory_order_relaxed);
  }

  void on_alloc(slot_id s, epoch_t birth) {
    Record& r = slots_[s];
    const epoch_t b1 = r.birth.load(std::memory_order_relaxed);
    const epoch_t r1 = r.retire.load(std::memory_order_relaxed);
    const SlotState prev = r.state.exchange(SlotState::allocated, std::memory_order_relaxed);
    if (prev != SlotState::free && prev != SlotState::retired)
      violation(s, "alloc-from-non-free", b1, r1, birth);
    if (b1 != 0) {
      reuses_.fetch_add(1, std::memory_order_relaxed);
      // Consecutive lifetimes: birth2 > retire1, and births never go backwards.
      if ((r1 != kNoEpoch && birth <= r1) || birth < b1)
        violation(s, "reuse-epoch-order", b1, r1, birth);
    }
    r.birth.store(birth, std::memory_order_relaxed);
    r.retire.store(kNoEpoch, std::memory_order_relaxed);
  }

  void on_release(slot_id s) {
    Record& r = slots_[s];
    const SlotState prev = r.state.exchange(SlotState::free, std::memory_order_relaxed);
    if (prev != SlotState::allocated)
      violation(s, "release-of-published", r.birth.load(std::memory_order_relaxed),
                r.retire.load(std::memory_order_relaxed), 0);
  }

  void on_mark(slot_id s) {
    Record& r = slots_[s];
    SlotState expected = SlotState::allocated;
    if (!r.state.compare_exchange_strong(expected, SlotState::marked, std::memory_order_relaxed))
      violation(s, "mark-in-state-" + std::to_string(static_cast<int>(expected)),
                r.birth.load(std::memory_order_relaxed), r.retire.load(std::memory_order_relaxed), 0);
  }

  /// `link_version` is the (immutable, since marked) version of the retired
  /// node's link at retirement.
  void on_retire(slot_id s, epoch_t birth, epoch_t retire, epoch_t link_version) {
    Record& r = slots_[s];
    SlotState expected = SlotState::marked;
    if (!r.state.compare_exchange_strong(expected, SlotState::retired, std::memory_order_relaxed))
      violation(s, "retire-in-state-" + std::to_string(static_cast<int>(expected)), birth, retire, 0);
    if (retire < birth) violation(s, "retire-before-birth", birth, retire, 0);
    if (link_version < birth || link_version > retire)
      version_violation(s, "link-version-outside-lifetime", birth, retire, link_version);
    r.retire.store(retire, std::memory_order_relaxed);
  }

  /// Write-site check of a successful link exchange.
  void on_link_write(slot_id owner, epoch_t owner_birth, epoch_t target_birth, epoch_t version) {
    ++link_writes_;
    if (version != std::max(owner_birth, target_birth))
      version_violation(owner, "link-version-formula", owner_birth, target_birth, version);
  }

  [[nodiscard]] std::uint64_t reuses() const noexcept { return reuses_.load(); }
  [[nodiscard]] std::uint64_t violations() const noexcept { return violations_.load(); }
  [[nodiscard]] std::uint64_t version_violations() const noexcept { return version_violations_.load(); }
  [[nodiscard]] std::uint64_t link_writes() const noexcept { return link_writes_.load(); }

  [[nodiscard]] SlotState state(slot_id s) const noexcept {
    return slots_[s].state.load(std::memory_order_relaxed);
  }

  [[nodiscard]] std::vector<std::string> lines() const {
    std::lock_guard lock(mu_);
    return lines_;
  }

 private:
  struct Record {
    std::atomic<epoch_t> birth{0};
    std::atomic<epoch_t> retire{0};
    std::atomic<SlotState> state{SlotState::free};
  };

  void violation(slot_id s, const std::string& kind, epoch_t b1, epoch_t r1, epoch_t b2) {
    violations_.fetch_add(1, std::memory_order_relaxed);
    record(s, kind, b1, r1, b2);
  }

  void version_violation(slot_id s, const std::string& kind, epoch_t a, epoch_t b, epoch_t v) {
    version_violations_.fetch_add(1, std::memory_order_relaxed);
    record(s, kind, a, b, v);
  }

  void record(slot_id s, const std::string& kind, epoch_t b1, epoch_t r1, epoch_t b2) {
    std::ostringstream os;
    os << "slot=" << s << " kind=" << kind << " lifetime=(" << b1 << ',' << r1 << ")→(" << b2
       << ",…)";
    std::lock_guard lock(mu_);
    if (lines_.size() < kMaxLines) lines_.push_back(os.str());
  }

  static constexpr std::size_t kMaxLines = 256;

  std::unique_ptr<Record[]> slots_;
  std::size_t capacity_;
  std::atomic<std::uint64_t> reuses_{0};
  std::atomic<std::uint64_t> violations_{0};
  std::atomic<std::uint64_t> version_violations_{0};
  std::atomic<std::uint64_t> link_writes_{0};
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

}  // namespace vbr
