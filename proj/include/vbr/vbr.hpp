#pragma once

// Version based reclamation.
//
// Threads read and write node memory optimistically, even after it has been
// recycled. Every node carries a birth and a retire epoch; every link carries
// a version equal to max(birth of owner, birth of target). A slot can only be
// handed out again at an epoch strictly larger than its previous retire
// epoch, so
//   * a read is trustworthy as long as the global epoch still equals the
//     thread's cached epoch (otherwise the caller gets Restart and rolls back
//     to its last checkpoint), and
//   * a link compare-exchange against a recycled node fails, because the
//     versions it expects can no longer match.
//
// Checkpoint discipline for callers: install one at every operation entry and
// right after every successful rollback-unsafe update (for a set: the
// insertion CAS and the mark). After such an update, previously obtained
// NodeRefs may only be used as CAS operands, passed to is_marked(), or
// retired; traversal restarts from an entry point. get_key() on a reference
// must be called before the next checkpoint after the reference was obtained.

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <memory>
#include <vector>

#include "vbr/cell.hpp"
#include "vbr/epoch.hpp"
#include "vbr/hooks.hpp"
#include "vbr/monitor.hpp"
#include "vbr/pools.hpp"
#include "vbr/types.hpp"

namespace vbr {

struct ContextStats {
  std::uint64_t rollbacks = 0;
  std::uint64_t alloc_restarts = 0;
  std::uint64_t epoch_advances = 0;  // advances won by this thread
  std::uint64_t checkpoints = 0;
  std::uint64_t retires = 0;
};

/// Per-thread VBR state. Owned by exactly one thread at a time.
class ThreadCtx {
 public:
  ThreadCtx(std::size_t id, Arena& arena)
      : id_(id), pool_(arena, arena.thread_begin(id), arena.thread_end(id)) {
    unpublished_.reserve(4);
    pending_retire_.reserve(4);
  }
  ThreadCtx(const ThreadCtx&) = delete;
  ThreadCtx& operator=(const ThreadCtx&) = delete;

  [[nodiscard]] std::size_t id() const noexcept { return id_; }
  [[nodiscard]] epoch_t my_epoch() const noexcept { return my_e_; }
  [[nodiscard]] const ContextStats& stats() const noexcept { return stats_; }
  [[nodiscard]] LocalPool& pool() noexcept { return pool_; }
  [[nodiscard]] const LocalPool& pool() const noexcept { return pool_; }
  [[nodiscard]] const std::vector<slot_id>& unpublished() const noexcept { return unpublished_; }
  [[nodiscard]] const std::vector<NodeRef>& pending_retire() const noexcept { return pending_retire_; }

 private:
  friend class VbrDomain;

  std::size_t id_;
  epoch_t my_e_ = kFirstEpoch;
  LocalPool pool_;
  std::vector<slot_id> unpublished_;    // allocated since the last checkpoint, not yet reachable
  std::vector<NodeRef> pending_retire_; // unlinked nodes this thread must retire
  ContextStats stats_;
};

class VbrDomain {
 public:
  using context_type = ThreadCtx;
  static constexpr bool versioned = true;
  static constexpr const char* name = "vbr";

  VbrDomain(std::size_t threads, const PoolConfig& config = {}, std::size_t reserved = 0, std::size_t overflow = 0)
      : arena_(threads, config, reserved, overflow) {
    contexts_.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
      contexts_.push_back(std::make_unique<ThreadCtx>(t, arena_));
  }

  [[nodiscard]] ThreadCtx& context(std::size_t tid) { return *contexts_.at(tid); }
  [[nodiscard]] std::size_t threads() const noexcept { return contexts_.size(); }
  [[nodiscard]] Arena& arena() noexcept { return arena_; }
  [[nodiscard]] const Arena& arena() const noexcept { return arena_; }
  [[nodiscard]] GlobalEpoch& epoch() noexcept { return epoch_; }
  [[nodiscard]] const GlobalEpoch& epoch() const noexcept { return epoch_; }

  void set_monitor(InvariantMonitor* m) noexcept { monitor_ = m; }

  [[nodiscard]] epoch_t epoch_read() const noexcept { return epoch_.read(); }
  bool epoch_try_advance(epoch_t expected) noexcept { return epoch_.try_advance(expected); }

  // ---- allocation / retirement ----------------------------------------

  Outcome<NodeRef> alloc(ThreadCtx& ctx, Key key) {
    const slot_id s = take_slot(ctx.pool_);
    Cell& c = arena_.cell(s);
    if (cell_ops::load(c.retire) >= ctx.my_e_) {
      if (epoch_.try_advance(ctx.my_e_)) ++ctx.stats_.epoch_advances;
      ctx.pool_.push_front(s);
      ++ctx.stats_.alloc_restarts;
      return restart;
    }
    const epoch_t b = ctx.my_e_;
    cell_ops::store(c.birth, b);
    cell_ops::store(c.retire, kNoEpoch);
    // The link of an unreachable slot is immutable, so this cannot fail.
    [[maybe_unused]] const bool ok = cell_ops::wcas(c, cell_ops::read_link(c), LinkValue{0, b});
    assert(ok);
    cell_ops::store(c.key, key);
    ctx.unpublished_.push_back(s);
    if (monitor_) monitor_->on_alloc(s, b);
    return NodeRef{s, b};
  }

  Outcome<void> retire(ThreadCtx& ctx, NodeRef n) {
    Cell& c = arena_.cell(n.slot);
    if (cell_ops::load(c.birth) > n.birth || cell_ops::load(c.retire) != kNoEpoch) return {};
    const epoch_t r = stamp_retired(ctx, n);
    VBR_HOOK(hooks::Point::after_retire);
    if (r > ctx.my_e_) return restart;
    return {};
  }

  // ---- reads -----------------------------------------------------------

  Outcome<NodeRef> get_next(ThreadCtx& ctx, NodeRef n) const {
    const std::uint64_t w = cell_ops::load(arena_.cell(n.slot).link_word);
    VBR_HOOK(hooks::Point::after_read_link);
    const slot_id next = LinkWord::target(w);
    const epoch_t next_birth = next == kNullSlot ? 0 : cell_ops::load(arena_.cell(next).birth);
    if (ctx.my_e_ != epoch_.read()) return restart;
    return NodeRef{next, next_birth};
  }

  Outcome<Key> get_key(ThreadCtx& ctx, NodeRef n) const {
    const Key k = cell_ops::load(arena_.cell(n.slot).key);
    if (ctx.my_e_ != epoch_.read()) return restart;
    return k;
  }

  /// Never restarts and never reads the global epoch.
  [[nodiscard]] bool is_marked(NodeRef n) const noexcept {
    const Cell& c = arena_.cell(n.slot);
    const bool marked = LinkWord::marked(cell_ops::load(c.link_word));
    if (cell_ops::load(c.birth) != n.birth) return true;
    return marked;
  }

  // ---- updates ---------------------------------------------------------

  /// Replaces n's unmarked link to `expected` with an unmarked link to
  /// `desired`. Fails if n was recycled, is marked, or no longer links to
  /// that lifetime of `expected`.
  bool update_link(NodeRef n, NodeRef expected, NodeRef desired) {
    epoch_t exp_v = std::max(n.birth, expected.birth);
    const epoch_t new_v = std::max(n.birth, desired.birth);
    VBR_HOOK(hooks::Point::before_cas);
    Cell& c = arena_.cell(n.slot);
#ifdef VBR_TEST_HOOKS
    if (fault_ignore_version_) exp_v = cell_ops::load(c.link_version);
#endif
    const bool ok = cell_ops::wcas(c, LinkValue{LinkWord::pack(expected.slot), exp_v},
                                   LinkValue{LinkWord::pack(desired.slot), new_v});
    if (ok && monitor_) {
      monitor_->on_link_write(n.slot, n.birth, desired.birth, new_v);
    }
    return ok;
  }

  /// Marks n's link, leaving target and version unchanged. When `sealed` is
  /// given it receives the successor the mark froze in place.
  bool mark(NodeRef n, NodeRef* sealed = nullptr) {
    Cell& c = arena_.cell(n.slot);
    const std::uint64_t w = LinkWord::unmarked(cell_ops::load(c.link_word));
    const slot_id exp = LinkWord::target(w);
    const epoch_t exp_b = exp == kNullSlot ? 0 : cell_ops::load(arena_.cell(exp).birth);
    const epoch_t exp_v = std::max(n.birth, exp_b);
    if (cell_ops::load(c.birth) != n.birth) return false;
    VBR_HOOK(hooks::Point::before_cas);
    if (!cell_ops::wcas(c, LinkValue{w, exp_v}, LinkValue{w | LinkWord::kMarkBit, exp_v}))
      return false;
    if (sealed) *sealed = NodeRef{exp, exp_b};
    if (monitor_) monitor_->on_mark(n.slot);
    return true;
  }

  // ---- checkpoints -----------------------------------------------------

  void begin_op(ThreadCtx& ctx) { checkpoint(ctx); }
  void end_op(ThreadCtx&) noexcept {}

  /// Installs a checkpoint: refreshes the cached epoch. Nodes allocated since
  /// the previous checkpoint are now published (or were released).
  void checkpoint(ThreadCtx& ctx) noexcept {
    ctx.my_e_ = epoch_.read();
    ctx.unpublished_.clear();
    ++ctx.stats_.checkpoints;
  }

  /// Pre-rollback duty, then refresh the cached epoch. Control flow returns
  /// to the caller's retry loop, whose head is the checkpoint.
  void rollback(ThreadCtx& ctx) {
    for (const slot_id s : ctx.unpublished_) {
      if (monitor_) monitor_->on_release(s);
      ctx.pool_.push_front(s);
    }
    ctx.unpublished_.clear();
    while (!ctx.pending_retire_.empty()) {
      const NodeRef n = ctx.pending_retire_.back();
      ctx.pending_retire_.pop_back();
      const Cell& c = arena_.cell(n.slot);
      if (cell_ops::load(c.birth) == n.birth && cell_ops::load(c.retire) == kNoEpoch)
        stamp_retired(ctx, n);
    }
    ctx.my_e_ = epoch_.read();
    ++ctx.stats_.rollbacks;
  }

  /// Gives back an allocated node that never became reachable.
  void release_unpublished(ThreadCtx& ctx, NodeRef n) {
    auto& u = ctx.unpublished_;
    u.erase(std::remove(u.begin(), u.end(), n.slot), u.end());
    if (monitor_) monitor_->on_release(n.slot);
    ctx.pool_.push_front(n.slot);
  }

  /// Records that n is known to be unlinked and this thread must retire it;
  /// a rollback before the retire happens will retire it on the way out.
  void note_unlinked(ThreadCtx& ctx, NodeRef n) {
    auto& p = ctx.pending_retire_;
    if (std::find(p.begin(), p.end(), n) == p.end()) p.push_back(n);
  }

  // ---- construction-time / quiescent access ---------------------------

  /// A node that is never marked or retired; taken from the reserved region.
  NodeRef make_sentinel(Key key) {
    const slot_id s = arena_.take_reserved();
    Cell& c = arena_.cell(s);
    const epoch_t b = epoch_.read();
    c.birth = b;
    c.retire = kNoEpoch;
    c.link_word = 0;
    c.link_version = b;
    c.key = key;
    if (monitor_) monitor_->on_sentinel(s, b);
    return NodeRef{s, b};
  }

  /// Sets a sentinel's successor before the structure is shared.
  void init_link(NodeRef n, NodeRef target) {
    Cell& c = arena_.cell(n.slot);
    c.link_word = LinkWord::pack(target.slot);
    c.link_version = std::max(n.birth, target.birth);
  }

  [[nodiscard]] const Cell& raw(slot_id s) const noexcept { return arena_.cell(s); }

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

#ifdef VBR_TEST_HOOKS
  /// Test-only mutation: compare the link word but accept whatever version is stored.
  void set_fault_ignore_version(bool on) noexcept { fault_ignore_version_ = on; }
#endif

 private:
  epoch_t stamp_retired(ThreadCtx& ctx, NodeRef n) {
    Cell& c = arena_.cell(n.slot);
    const epoch_t r = epoch_.read();
    cell_ops::store(c.retire, r);
    if (monitor_) monitor_->on_retire(n.slot, n.birth, r, cell_ops::load(c.link_version));
    auto& p = ctx.pending_retire_;
    p.erase(std::remove(p.begin(), p.end(), n), p.end());
    ++ctx.stats_.retires;
    ctx.pool_.retire_push(n.slot);
    ctx.pool_.flush_retired();
    return r;
  }

  Arena arena_;
  GlobalEpoch epoch_;
  std::vector<std::unique_ptr<ThreadCtx>> contexts_;
  InvariantMonitor* monitor_ = nullptr;
#ifdef VBR_TEST_HOOKS
  bool fault_ignore_version_ = false;
#endif
};

}  // namespace vbr
