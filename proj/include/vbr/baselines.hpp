#pragma once

// Comparison reclamation schemes exposing the same surface as VbrDomain so
// the set implementations are written once:
//   EbrDomain    - epoch-based reclamation with a per-thread announcement array
//   NoReclDomain - retired nodes are leaked until the end of the run
// Reads never produce Restart. The one exception is EBR allocation from an
// empty pool: the add backs out, the thread leaves and re-enters its critical
// section so the epoch can move, and the add tries again. Links are updated
// with a single-word CAS and versions are left untouched.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <thread>
#include <vector>

#include "vbr/cell.hpp"
#include "vbr/epoch.hpp"
#include "vbr/hooks.hpp"
#include "vbr/pools.hpp"
#include "vbr/types.hpp"

namespace vbr {

namespace detail {

/// Link/key access without epoch validation, shared by the baselines.
class PlainNodes {
 public:
  PlainNodes(std::size_t threads, const PoolConfig& config, std::size_t reserved, std::size_t overflow)
      : arena_(threads, config, reserved, overflow) {}

  [[nodiscard]] Arena& arena() noexcept { return arena_; }
  [[nodiscard]] const Arena& arena() const noexcept { return arena_; }
  [[nodiscard]] GlobalEpoch& epoch() noexcept { return epoch_; }
  [[nodiscard]] epoch_t epoch_read() const noexcept { return epoch_.read(); }

  template <class Ctx>
  Outcome<NodeRef> get_next(Ctx&, NodeRef n) const {
    const std::uint64_t w = cell_ops::load(arena_.cell(n.slot).link_word);
    VBR_HOOK(hooks::Point::after_read_link);
    const slot_id next = LinkWord::target(w);
    return NodeRef{next, next == kNullSlot ? 0 : cell_ops::load(arena_.cell(next).birth)};
  }

  template <class Ctx>
  Outcome<Key> get_key(Ctx&, NodeRef n) const {
    return cell_ops::load(arena_.cell(n.slot).key);
  }

  [[nodiscard]] bool is_marked(NodeRef n) const noexcept {
    return LinkWord::marked(cell_ops::load(arena_.cell(n.slot).link_word));
  }

  bool update_link(NodeRef n, NodeRef expected, NodeRef desired) {
    VBR_HOOK(hooks::Point::before_cas);
    std::uint64_t exp = LinkWord::pack(expected.slot);
    return cell_ops::cas(arena_.cell(n.slot).link_word, exp, LinkWord::pack(desired.slot));
  }

  bool mark(NodeRef n, NodeRef* sealed = nullptr) {
    Cell& c = arena_.cell(n.slot);
    std::uint64_t w = cell_ops::load(c.link_word);
    if (LinkWord::marked(w)) return false;
    VBR_HOOK(hooks::Point::before_cas);
    if (!cell_ops::cas(c.link_word, w, w | LinkWord::kMarkBit)) return false;
    if (sealed) {
      const slot_id t = LinkWord::target(w);
      *sealed = NodeRef{t, t == kNullSlot ? 0 : cell_ops::load(arena_.cell(t).birth)};
    }
    return true;
  }

  template <class Ctx>
  void checkpoint(Ctx&) noexcept {}
  template <class Ctx>
  void rollback(Ctx&) noexcept {}
  template <class Ctx>
  void note_unlinked(Ctx&, NodeRef) noexcept {}

  NodeRef make_sentinel(Key key) {
    const slot_id s = arena_.take_reserved();
    Cell& c = arena_.cell(s);
    c.birth = epoch_.read();
    c.retire = kNoEpoch;
    c.link_word = 0;
    c.link_version = 0;
    c.key = key;
    return NodeRef{s, c.birth};
  }

  void init_link(NodeRef n, NodeRef target) {
    arena_.cell(n.slot).link_word = LinkWord::pack(target.slot);
  }

  [[nodiscard]] const Cell& raw(slot_id s) const noexcept { return arena_.cell(s); }

 protected:
  NodeRef init_node(slot_id s, Key key) {
    Cell& c = arena_.cell(s);
    const epoch_t b = epoch_.read();
    cell_ops::store(c.birth, b);
    cell_ops::store(c.retire, kNoEpoch);
    cell_ops::store(c.link_word, std::uint64_t{0});
    cell_ops::store(c.key, key);
    return NodeRef{s, b};
  }

  Arena arena_;
  GlobalEpoch epoch_;
};

}  // namespace detail

// ---------------------------------------------------------------------------

struct EbrStats {
  std::uint64_t epoch_advances = 0;
  std::uint64_t reclaimed = 0;
  std::uint64_t retires = 0;
  std::uint64_t exhaustion_waits = 0;
};

class EbrCtx {
 public:
  EbrCtx(std::size_t id, Arena& arena) : id_(id), pool_(arena, arena.thread_begin(id), arena.thread_end(id)) {}
  EbrCtx(const EbrCtx&) = delete;
  EbrCtx& operator=(const EbrCtx&) = delete;

  [[nodiscard]] std::size_t id() const noexcept { return id_; }
  [[nodiscard]] const EbrStats& stats() const noexcept { return stats_; }
  [[nodiscard]] LocalPool& pool() noexcept { return pool_; }
  [[nodiscard]] const LocalPool& pool() const noexcept { return pool_; }

 private:
  friend class EbrDomain;
  std::size_t id_;
  LocalPool pool_;
  std::uint64_t ops_ = 0;
  bool exhausted_ = false;
  std::chrono::steady_clock::time_point exhausted_since_{};
  EbrStats stats_;
};

class EbrDomain : public detail::PlainNodes {
 public:
  using context_type = EbrCtx;
  static constexpr bool versioned = false;
  static constexpr const char* name = "ebr";
  static constexpr std::size_t kDefaultAdvanceEvery = 128;

  EbrDomain(std::size_t threads, const PoolConfig& config = {}, std::size_t reserved = 0, std::size_t overflow = 0)
      : PlainNodes(threads, config, reserved, overflow), announce_(std::make_unique<Announcement[]>(threads)) {
    contexts_.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) contexts_.push_back(std::make_unique<EbrCtx>(t, arena_));
  }

  [[nodiscard]] EbrCtx& context(std::size_t tid) { return *contexts_.at(tid); }
  [[nodiscard]] std::size_t threads() const noexcept { return contexts_.size(); }

  /// Publishes the observed epoch; the thread is now protected.
  void begin_op(EbrCtx& ctx) noexcept {
    auto& slot = announce_[ctx.id_].epoch;
    epoch_t e = epoch_.read();
    for (;;) {
      slot.store(e, std::memory_order_seq_cst);
      const epoch_t again = epoch_.read();
      if (again == e) break;
      e = again;
    }
  }

  void end_op(EbrCtx& ctx) noexcept {
    announce_[ctx.id_].epoch.store(kNoEpoch, std::memory_order_release);
    if (++ctx.ops_ % advance_every_ == 0) try_advance(ctx);
  }

  /// Announced epoch of thread `tid`, 0 when outside an operation.
  [[nodiscard]] epoch_t announcement(std::size_t tid) const noexcept {
    return announce_[tid].epoch.load(std::memory_order_seq_cst);
  }

  /// Restart when no slot can be reclaimed yet; PoolExhausted once that has
  /// lasted longer than the exhaustion timeout.
  Outcome<NodeRef> alloc(EbrCtx& ctx, Key key) {
    auto& pool = ctx.pool_;
    std::optional<slot_id> s = pool.pop();
    if (!s && reclaim(ctx) != 0) s = pool.pop();
    if (!s && pool.steal_from_global()) s = pool.pop();
    if (!s) {
      try_advance(ctx);
      if (reclaim(ctx) != 0) s = pool.pop();
    }
    if (!s) {
      const auto now = std::chrono::steady_clock::now();
      if (!ctx.exhausted_) {
        ctx.exhausted_ = true;
        ctx.exhausted_since_ = now;
      } else if (now - ctx.exhausted_since_ > exhaustion_timeout_) {
        ctx.exhausted_ = false;
        end_op(ctx);
        throw PoolExhausted();
      }
      ++ctx.stats_.exhaustion_waits;
      return restart;
    }
    ctx.exhausted_ = false;
    return init_node(*s, key);
  }

  /// Only reached after an exhausted alloc, when the caller holds nothing
  /// published: step out of the critical section and back in.
  void rollback(EbrCtx& ctx) {
    announce_[ctx.id_].epoch.store(kNoEpoch, std::memory_order_seq_cst);
    std::this_thread::yield();
    try_advance(ctx);
    begin_op(ctx);
  }

  /// Operations per thread between epoch advance attempts.
  void set_advance_every(std::size_t n) noexcept { advance_every_ = std::max<std::size_t>(1, n); }
  void set_exhaustion_timeout(std::chrono::milliseconds t) noexcept { exhaustion_timeout_ = t; }

  Outcome<void> retire(EbrCtx& ctx, NodeRef n) {
    cell_ops::store(arena_.cell(n.slot).retire, epoch_.read());
    ++ctx.stats_.retires;
    ctx.pool_.retire_push(n.slot);
    VBR_HOOK(hooks::Point::after_retire);
    if (ctx.pool_.retired_size() >= arena_.config().retired_threshold) reclaim(ctx);
    return {};
  }

  void release_unpublished(EbrCtx& ctx, NodeRef n) { ctx.pool_.push_front(n.slot); }

  /// Moves every retired slot whose retire epoch precedes all active
  /// announcements to the allocation list.
  std::size_t reclaim(EbrCtx& ctx) {
    epoch_t min_active = ~epoch_t{0};
    for (std::size_t t = 0; t < contexts_.size(); ++t) {
      const epoch_t a = announcement(t);
      if (a != kNoEpoch && a < min_active) min_active = a;
    }
    const std::size_t n = ctx.pool_.reclaim_if([&](slot_id s) {
      return cell_ops::load(arena_.cell(s).retire) < min_active;
    });
    ctx.stats_.reclaimed += n;
    return n;
  }

  /// Advances the epoch if every active thread has caught up with it.
  bool try_advance(EbrCtx& ctx) noexcept {
    const epoch_t e = epoch_.read();
    for (std::size_t t = 0; t < contexts_.size(); ++t) {
      const epoch_t a = announcement(t);
      if (a != kNoEpoch && a != e) return false;
    }
    if (!epoch_.try_advance(e)) return false;
    ++ctx.stats_.epoch_advances;
    return true;
  }

  [[nodiscard]] std::size_t retired_backlog() const noexcept {
    std::size_t n = 0;
    for (const auto& c : contexts_) n += c->pool_.retired_size();
    return n;
  }

  template <class F>
  void for_each_pooled_slot(F&& f) const {
    for (const auto& c : contexts_) c->pool_.for_each_slot(f);
    arena_.global().for_each_slot(f);
  }

 private:
  struct alignas(64) Announcement {
    std::atomic<epoch_t> epoch{kNoEpoch};
  };

  std::unique_ptr<Announcement[]> announce_;
  std::size_t advance_every_ = kDefaultAdvanceEvery;
  std::chrono::steady_clock::duration exhaustion_timeout_ = std::chrono::milliseconds(500);
  std::vector<std::unique_ptr<EbrCtx>> contexts_;
};

// ---------------------------------------------------------------------------

class NoReclCtx {
 public:
  NoReclCtx(std::size_t id, Arena& arena) : id_(id), pool_(arena, arena.thread_begin(id), arena.thread_end(id)) {}
  NoReclCtx(const NoReclCtx&) = delete;
  NoReclCtx& operator=(const NoReclCtx&) = delete;

  [[nodiscard]] std::size_t id() const noexcept { return id_; }
  [[nodiscard]] const std::vector<slot_id>& leaked() const noexcept { return leaked_; }
  [[nodiscard]] LocalPool& pool() noexcept { return pool_; }
  [[nodiscard]] const LocalPool& pool() const noexcept { return pool_; }

 private:
  friend class NoReclDomain;
  std::size_t id_;
  LocalPool pool_;
  std::vector<slot_id> leaked_;
};

class NoReclDomain : public detail::PlainNodes {
 public:
  using context_type = NoReclCtx;
  static constexpr bool versioned = false;
  static constexpr const char* name = "none";

  NoReclDomain(std::size_t threads, const PoolConfig& config = {}, std::size_t reserved = 0, std::size_t overflow = 0)
      : PlainNodes(threads, config, reserved, overflow) {
    contexts_.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
      contexts_.push_back(std::make_unique<NoReclCtx>(t, arena_));
  }

  [[nodiscard]] NoReclCtx& context(std::size_t tid) { return *contexts_.at(tid); }
  [[nodiscard]] std::size_t threads() const noexcept { return contexts_.size(); }

  void begin_op(NoReclCtx&) noexcept {}
  void end_op(NoReclCtx&) noexcept {}

  Outcome<NodeRef> alloc(NoReclCtx& ctx, Key key) {
    std::optional<slot_id> s = ctx.pool_.pop();
    if (!s && ctx.pool_.steal_from_global()) s = ctx.pool_.pop();
    if (!s) throw PoolExhausted();
    return init_node(*s, key);
  }

  Outcome<void> retire(NoReclCtx& ctx, NodeRef n) {
    cell_ops::store(arena_.cell(n.slot).retire, epoch_.read());
    ctx.leaked_.push_back(n.slot);
    VBR_HOOK(hooks::Point::after_retire);
    return {};
  }

  void release_unpublished(NoReclCtx& ctx, NodeRef n) { ctx.pool_.push_front(n.slot); }

  [[nodiscard]] std::size_t leak_count() const noexcept {
    std::size_t n = 0;
    for (const auto& c : contexts_) n += c->leaked_.size();
    return n;
  }

  [[nodiscard]] std::size_t retired_backlog() const noexcept { return leak_count(); }

  template <class F>
  void for_each_pooled_slot(F&& f) const {
    for (const auto& c : contexts_) {
      c->pool_.for_each_slot(f);
      for (const slot_id s : c->leaked_) f(s);
    }
    arena_.global().for_each_slot(f);
  }

 private:
  std::vector<std::unique_ptr<NoReclCtx>> contexts_;
};

}  // namespace vbr
