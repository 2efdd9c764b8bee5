#pragma once

// Type-preserving slot arena, per-thread allocation and retired lists, and a
// shared lock-free pool of slot batches. Memory is never returned to the OS.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "vbr/cell.hpp"
#include "vbr/types.hpp"

namespace vbr {

struct PoolConfig {
  std::size_t slots_per_thread = 4096;
  std::size_t retired_threshold = 64;
  std::size_t steal_batch = 32;

  void validate() const {
    if (retired_threshold < 1) throw std::invalid_argument("retired_threshold must be >= 1");
    if (slots_per_thread < retired_threshold + 2)
      throw std::invalid_argument("slots_per_thread must be >= retired_threshold + 2");
    if (steal_batch < 1) throw std::invalid_argument("steal_batch must be >= 1");
  }
};

namespace detail {

inline constexpr std::uint32_t encode(slot_id s) noexcept { return s == kNullSlot ? 0 : s + 1; }
inline constexpr slot_id decode(std::uint32_t v) noexcept { return v == 0 ? kNullSlot : v - 1; }

struct FreeDeleter {
  void operator()(void* p) const noexcept { std::free(p); }
};

}  // namespace detail

/// Lock-free stack of slot batches. The top word carries a 32-bit tag so a
/// batch head that is popped and pushed back cannot fool a stale CAS.
class GlobalPool {
 public:
  explicit GlobalPool(Cell* cells) : cells_(cells) {}

  /// Pushes the chain head..(count slots via pool_next) as one unit.
  void push(slot_id head, std::uint32_t count) noexcept {
    Cell& h = cells_[head];
    cell_ops::store(h.batch_count, count, std::memory_order_relaxed);
    std::uint64_t old = top_.load(std::memory_order_acquire);
    for (;;) {
      cell_ops::store(h.batch_next, static_cast<std::uint32_t>(old & 0xffffffffu),
                      std::memory_order_relaxed);
      const std::uint64_t next = ((old >> 32) + 1) << 32 | detail::encode(head);
      if (top_.compare_exchange_weak(old, next, std::memory_order_acq_rel,
                                     std::memory_order_acquire))
        break;
    }
    slots_.fetch_add(count, std::memory_order_relaxed);
  }

  struct Batch {
    slot_id head;
    std::uint32_t count;
  };

  std::optional<Batch> pop() noexcept {
    std::uint64_t old = top_.load(std::memory_order_acquire);
    for (;;) {
      const slot_id head = detail::decode(static_cast<std::uint32_t>(old & 0xffffffffu));
      if (head == kNullSlot) return std::nullopt;
      const std::uint32_t below = cell_ops::load(cells_[head].batch_next, std::memory_order_relaxed);
      const std::uint64_t next = ((old >> 32) + 1) << 32 | below;
      if (top_.compare_exchange_weak(old, next, std::memory_order_acq_rel,
                                     std::memory_order_acquire)) {
        const auto count = cell_ops::load(cells_[head].batch_count, std::memory_order_relaxed);
        slots_.fetch_sub(count, std::memory_order_relaxed);
        return Batch{head, count};
      }
    }
  }

  [[nodiscard]] std::size_t approx_slots() const noexcept {
    return slots_.load(std::memory_order_relaxed);
  }

  /// Quiescent only.
  template <class F>
  void for_each_slot(F&& f) const {
    slot_id b = detail::decode(static_cast<std::uint32_t>(top_.load() & 0xffffffffu));
    while (b != kNullSlot) {
      slot_id s = b;
      for (std::uint32_t i = 0, n = cells_[b].batch_count; i < n; ++i) {
        f(s);
        s = detail::decode(cells_[s].pool_next);
      }
      b = detail::decode(cells_[b].batch_next);
    }
  }

 private:
  Cell* cells_;
  alignas(64) std::atomic<std::uint64_t> top_{0};
  std::atomic<std::size_t> slots_{0};
};

/// Fixed array of cells, pre-allocated up front. The first `reserved` slots
/// are handed out as data-structure sentinels, then come the per-thread
/// ranges, then an optional shared overflow range that threads carve batches
/// from once everything else is empty. Zero-filled memory from calloc is only
/// committed as it is touched, so large arenas (no-reclamation runs) are
/// cheap to reserve.
class Arena {
 public:
  Arena(std::size_t threads, const PoolConfig& config, std::size_t reserved = 0, std::size_t overflow = 0)
      : threads_(threads), config_(config), reserved_(reserved) {
    if (threads == 0) throw ZeroCapacity("arena needs at least one thread");
    config.validate();
    capacity_ = threads * config.slots_per_thread + reserved + overflow;
    if (capacity_ >= kNullSlot) throw std::invalid_argument("arena capacity exceeds slot id range");
    raw_.reset(std::calloc(capacity_ + 1, sizeof(Cell)));
    if (!raw_) throw std::bad_alloc();
    auto addr = reinterpret_cast<std::uintptr_t>(raw_.get());
    addr = (addr + alignof(Cell) - 1) & ~(std::uintptr_t{alignof(Cell)} - 1);
    cells_ = reinterpret_cast<Cell*>(addr);
    global_ = std::make_unique<GlobalPool>(cells_);
    overflow_next_.store(reserved + threads * config.slots_per_thread, std::memory_order_relaxed);
  }

  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  [[nodiscard]] Cell& cell(slot_id s) noexcept { return cells_[s]; }
  [[nodiscard]] const Cell& cell(slot_id s) const noexcept { return cells_[s]; }

  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] std::size_t threads() const noexcept { return threads_; }
  [[nodiscard]] std::size_t reserved() const noexcept { return reserved_; }
  [[nodiscard]] const PoolConfig& config() const noexcept { return config_; }
  [[nodiscard]] GlobalPool& global() noexcept { return *global_; }
  [[nodiscard]] const GlobalPool& global() const noexcept { return *global_; }

  [[nodiscard]] slot_id thread_begin(std::size_t t) const noexcept {
    return static_cast<slot_id>(reserved_ + t * config_.slots_per_thread);
  }
  [[nodiscard]] slot_id thread_end(std::size_t t) const noexcept {
    return static_cast<slot_id>(reserved_ + (t + 1) * config_.slots_per_thread);
  }

  /// Hands out the next reserved slot. Single-threaded (construction time).
  slot_id take_reserved() {
    if (next_reserved_ >= reserved_) throw PoolExhausted();
    return static_cast<slot_id>(next_reserved_++);
  }
  [[nodiscard]] std::size_t reserved_used() const noexcept { return next_reserved_; }

  /// Claims up to `n` never-used overflow slots as [begin, end).
  std::optional<std::pair<slot_id, slot_id>> take_overflow(std::size_t n) noexcept {
    std::size_t begin = overflow_next_.fetch_add(n, std::memory_order_relaxed);
    if (begin >= capacity_) return std::nullopt;
    return std::pair{static_cast<slot_id>(begin), static_cast<slot_id>(std::min(begin + n, capacity_))};
  }

  /// First overflow slot not yet claimed by any thread.
  [[nodiscard]] std::size_t overflow_claimed_end() const noexcept {
    return std::min(overflow_next_.load(std::memory_order_relaxed), capacity_);
  }

 private:
  std::size_t threads_;
  PoolConfig config_;
  std::size_t reserved_;
  std::size_t capacity_ = 0;
  std::size_t next_reserved_ = 0;
  std::atomic<std::size_t> overflow_next_{0};
  std::unique_ptr<void, detail::FreeDeleter> raw_;
  Cell* cells_ = nullptr;
  std::unique_ptr<GlobalPool> global_;
};

/// Per-thread allocation list and retired list, both intrusive through
/// Cell::pool_next. Single owner; only `retired_size()` may be read by others.
///
/// The allocation list is an explicit list followed by a "fresh" range of
/// never-used slots; the two together are what the thread can allocate from.
class LocalPool {
 public:
  LocalPool(Arena& arena, slot_id fresh_begin, slot_id fresh_end)
      : arena_(&arena), fresh_next_(fresh_begin), fresh_end_(fresh_end) {}

  /// Head of the allocation list (list first, then fresh range).
  std::optional<slot_id> pop() noexcept {
    if (alloc_.head != kNullSlot) return alloc_.pop_front(*arena_);
    if (fresh_next_ < fresh_end_) return fresh_next_++;
    return std::nullopt;
  }

  void push_front(slot_id s) noexcept { alloc_.push_front(*arena_, s); }

  [[nodiscard]] std::size_t available() const noexcept {
    return alloc_.size + (fresh_end_ - fresh_next_);
  }
  [[nodiscard]] std::size_t list_size() const noexcept { return alloc_.size; }

  void retire_push(slot_id s) noexcept {
    retired_.push_back(*arena_, s);
    note_retired_size();
  }

  [[nodiscard]] std::size_t retired_size() const noexcept {
    return retired_size_.load(std::memory_order_relaxed);
  }
  [[nodiscard]] std::size_t peak_retired() const noexcept { return peak_retired_; }

  /// Appends the whole retired list to the allocation list once it holds at
  /// least `retired_threshold` slots (or unconditionally when forced).
  bool flush_retired(bool force = false) noexcept {
    if (retired_.size == 0) return false;
    if (!force && retired_.size < arena_->config().retired_threshold) return false;
    alloc_.append(*arena_, retired_);
    note_retired_size();
    rebalance();
    return true;
  }

  /// Moves retired slots accepted by `safe` to the tail of the allocation list.
  template <class Pred>
  std::size_t reclaim_if(Pred&& safe) noexcept {
    List keep;
    std::size_t moved = 0;
    while (retired_.head != kNullSlot) {
      const slot_id s = retired_.pop_front(*arena_);
      if (safe(s)) {
        alloc_.push_back(*arena_, s);
        ++moved;
      } else {
        keep.push_back(*arena_, s);
      }
    }
    retired_ = keep;
    note_retired_size();
    if (moved != 0) rebalance();
    return moved;
  }

  /// Pushes `batch` slots from the allocation list to the global pool.
  void donate_to_global(std::size_t batch) noexcept {
    if (batch == 0 || alloc_.size < batch) return;
    const slot_id head = alloc_.head;
    slot_id last = head;
    for (std::size_t i = 1; i < batch; ++i) last = detail::decode(arena_->cell(last).pool_next);
    alloc_.head = detail::decode(arena_->cell(last).pool_next);
    if (alloc_.head == kNullSlot) alloc_.tail = kNullSlot;
    alloc_.size -= batch;
    arena_->cell(last).pool_next = 0;
    arena_->global().push(head, static_cast<std::uint32_t>(batch));
  }

  /// Takes one batch from the global pool into the allocation list, or else
  /// a fresh range from the arena's overflow region.
  bool steal_from_global() noexcept {
    auto b = arena_->global().pop();
    if (!b) {
      if (fresh_next_ < fresh_end_) return false;
      auto r = arena_->take_overflow(std::max<std::size_t>(arena_->config().steal_batch, 256));
      if (!r) return false;
      fresh_next_ = r->first;
      fresh_end_ = r->second;
      return true;
    }
    slot_id s = b->head;
    for (std::uint32_t i = 0; i < b->count; ++i) {
      const slot_id next = detail::decode(arena_->cell(s).pool_next);
      alloc_.push_back(*arena_, s);
      s = next;
    }
    return true;
  }

  /// Quiescent only: visits every slot held by this pool.
  template <class F>
  void for_each_slot(F&& f) const {
    for (slot_id s = alloc_.head; s != kNullSlot; s = detail::decode(arena_->cell(s).pool_next)) f(s);
    for (slot_id s = fresh_next_; s < fresh_end_; ++s) f(s);
    for (slot_id s = retired_.head; s != kNullSlot; s = detail::decode(arena_->cell(s).pool_next)) f(s);
  }

 private:
  struct List {
    slot_id head = kNullSlot;
    slot_id tail = kNullSlot;
    std::size_t size = 0;

    void push_front(Arena& a, slot_id s) noexcept {
      a.cell(s).pool_next = detail::encode(head);
      head = s;
      if (tail == kNullSlot) tail = s;
      ++size;
    }
    void push_back(Arena& a, slot_id s) noexcept {
      a.cell(s).pool_next = 0;
      if (tail == kNullSlot) {
        head = s;
      } else {
        a.cell(tail).pool_next = detail::encode(s);
      }
      tail = s;
      ++size;
    }
    slot_id pop_front(Arena& a) noexcept {
      const slot_id s = head;
      head = detail::decode(a.cell(s).pool_next);
      if (head == kNullSlot) tail = kNullSlot;
      --size;
      return s;
    }
    void append(Arena& a, List& other) noexcept {
      if (other.head == kNullSlot) return;
      if (tail == kNullSlot) {
        head = other.head;
      } else {
        a.cell(tail).pool_next = detail::encode(other.head);
      }
      tail = other.tail;
      size += other.size;
      other = List{};
    }
  };

  void note_retired_size() noexcept {
    retired_size_.store(retired_.size, std::memory_order_relaxed);
    if (retired_.size > peak_retired_) peak_retired_ = retired_.size;
  }

  // Keeps a thread that mostly removes from hoarding slots the others need.
  void rebalance() noexcept {
    const auto& cfg = arena_->config();
    while (alloc_.size >= cfg.steal_batch &&
           available() > cfg.slots_per_thread + cfg.steal_batch) {
      donate_to_global(cfg.steal_batch);
    }
  }

  Arena* arena_;
  List alloc_;
  List retired_;
  slot_id fresh_next_;
  slot_id fresh_end_;
  std::atomic<std::size_t> retired_size_{0};
  std::size_t peak_retired_ = 0;
};

/// Allocation-side slot acquisition shared by schemes that may reuse a
/// retired slot immediately: local list, then the retired list once it is at
/// threshold, then a batch from the global pool, then whatever is retired.
inline slot_id take_slot(LocalPool& pool) {
  if (auto s = pool.pop()) return *s;
  if (pool.flush_retired() || pool.steal_from_global() || pool.flush_retired(true)) {
    if (auto s = pool.pop()) return *s;
  }
  throw PoolExhausted();
}

}  // namespace vbr
