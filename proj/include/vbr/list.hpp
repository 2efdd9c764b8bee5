#pragma once

// Sorted lock-free linked-list set. Deleted nodes are marked first and then
// unlinked; searches trim marked nodes they pass. The list is parameterised
// by a reclamation domain (VbrDomain, EbrDomain, NoReclDomain); with VBR every
// epoch-checked read may ask for a rollback, which brings the operation back
// to its last checkpoint.
//
// Keys must lie strictly between kMinKey and kMaxKey.

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

#include "vbr/cell.hpp"
#include "vbr/types.hpp"

namespace vbr {

template <class Domain>
class LockFreeList {
 public:
  using domain_type = Domain;
  using Ctx = typename Domain::context_type;

  /// Sentinel slots a standalone list takes from the domain's reserved region.
  static constexpr std::size_t reserved_slots() noexcept { return 2; }

  explicit LockFreeList(Domain& domain) : dom_(&domain) {
    head_ = domain.make_sentinel(kMinKey);
    tail_ = domain.make_sentinel(kMaxKey);
    domain.init_link(head_, tail_);
  }

  /// Bucket form: one new head sentinel linked to a shared tail.
  LockFreeList(Domain& domain, NodeRef shared_tail) : dom_(&domain), tail_(shared_tail) {
    head_ = domain.make_sentinel(kMinKey);
    domain.init_link(head_, tail_);
  }

  [[nodiscard]] NodeRef head() const noexcept { return head_; }
  [[nodiscard]] NodeRef tail() const noexcept { return tail_; }
  [[nodiscard]] Domain& domain() const noexcept { return *dom_; }

  bool add(Ctx& ctx, Key key) {
    assert(key > kMinKey && key < kMaxKey);
    Domain& d = *dom_;
    d.begin_op(ctx);
    NodeRef node = kNullRef;
    NodeRef node_next = kNullRef;
    for (;;) {
      auto w = find(ctx, key, nullptr);
      if (!w) {
        d.rollback(ctx);
        node = kNullRef;
        continue;
      }
      if (w->curr_key == key) {
        if (!node.null()) d.release_unpublished(ctx, node);
        d.end_op(ctx);
        return false;
      }
      if (node.null()) {
        auto a = d.alloc(ctx, key);
        if (!a) {
          d.rollback(ctx);
          continue;
        }
        node = *a;
        node_next = kNullRef;
      }
      // The node is still private, so only we write its link.
      [[maybe_unused]] const bool linked = d.update_link(node, node_next, w->curr);
      assert(linked);
      node_next = w->curr;
      if (d.update_link(w->pred, w->curr, node)) {
        d.checkpoint(ctx);
        d.end_op(ctx);
        return true;
      }
    }
  }

  bool remove(Ctx& ctx, Key key) {
    assert(key > kMinKey && key < kMaxKey);
    Domain& d = *dom_;
    d.begin_op(ctx);
    enum class Phase { search, marked, unlinked } phase = Phase::search;
    NodeRef victim = kNullRef;
    for (;;) {
      if (phase == Phase::search) {
        auto w = find(ctx, key, nullptr);
        if (!w) {
          d.rollback(ctx);
          continue;
        }
        if (w->curr_key != key) {
          d.end_op(ctx);
          return false;
        }
        NodeRef sealed;
        if (!d.mark(w->curr, &sealed)) continue;
        victim = w->curr;
        phase = Phase::marked;
        d.checkpoint(ctx);
        if (d.update_link(w->pred, victim, sealed)) {
          d.note_unlinked(ctx, victim);
          phase = Phase::unlinked;
        }
      }
      if (phase == Phase::marked) {
        // Someone else's CAS got in first; a full search is guaranteed to
        // trim the victim if it is still reachable.
        auto w = find(ctx, key, &victim);
        if (!w) {
          d.rollback(ctx);
          continue;
        }
        d.note_unlinked(ctx, victim);
        phase = Phase::unlinked;
      }
      if (d.retire(ctx, victim).restarted()) d.rollback(ctx);
      d.end_op(ctx);
      return true;
    }
  }

  bool contains(Ctx& ctx, Key key) {
    assert(key > kMinKey && key < kMaxKey);
    Domain& d = *dom_;
    d.begin_op(ctx);
    for (;;) {
      auto r = lookup(ctx, key);
      if (!r) {
        d.rollback(ctx);
        continue;
      }
      d.end_op(ctx);
      return *r;
    }
  }

  // ---- quiescent inspection ----------------------------------------------

  /// Keys of all reachable unmarked data nodes, in list order.
  [[nodiscard]] std::vector<Key> snapshot() const {
    std::vector<Key> keys;
    for_each_reachable([&](slot_id s) { keys.push_back(raw(s).key); });
    return keys;
  }

  [[nodiscard]] std::size_t size() const {
    std::size_t n = 0;
    for_each_reachable([&](slot_id) { ++n; });
    return n;
  }

  /// Visits every reachable data node (sentinels excluded).
  template <class F>
  void for_each_reachable(F&& f) const {
    slot_id s = LinkWord::target(raw(head_.slot).link_word);
    while (s != kNullSlot && s != tail_.slot) {
      f(s);
      s = LinkWord::target(raw(s).link_word);
    }
  }

  /// Empty string when the list is well formed: strictly ascending keys,
  /// no marked node reachable, ends at the tail sentinel.
  [[nodiscard]] std::string validate() const {
    Key prev = kMinKey;
    slot_id s = head_.slot;
    std::size_t steps = 0;
    const std::size_t limit = dom_->arena().capacity() + 1;
    for (;;) {
      const std::uint64_t w = raw(s).link_word;
      if (LinkWord::marked(w)) return "marked node reachable at slot " + std::to_string(s);
      const slot_id next = LinkWord::target(w);
      if (next == kNullSlot) return "list does not end at the tail sentinel";
      if (next == tail_.slot) return {};
      const Key k = raw(next).key;
      if (k <= prev) return "keys out of order at slot " + std::to_string(next);
      prev = k;
      s = next;
      if (++steps > limit) return "cycle detected";
    }
  }

  /// Number of reachable links whose stored version differs from
  /// max(owner birth, target birth). Only meaningful for versioned domains.
  [[nodiscard]] std::size_t version_mismatches() const {
    std::size_t bad = 0;
    slot_id s = head_.slot;
    while (s != tail_.slot) {
      const Cell& c = raw(s);
      const slot_id next = LinkWord::target(c.link_word);
      if (next == kNullSlot) break;
      const epoch_t want = std::max(c.birth, raw(next).birth);
      if (c.link_version != want) ++bad;
      s = next;
    }
    return bad;
  }

 private:
  struct Window {
    NodeRef pred;
    NodeRef curr;
    Key curr_key;
  };

  const Cell& raw(slot_id s) const noexcept { return dom_->raw(s); }

  // Returns the first unmarked node with key >= `key` and its predecessor,
  // unlinking marked nodes on the way. If `victim` is trimmed here it is
  // recorded as ours to retire.
  Outcome<Window> find(Ctx& ctx, Key key, const NodeRef* victim) {
    Domain& d = *dom_;
  from_head:
    NodeRef pred = head_;
    auto first = d.get_next(ctx, pred);
    if (!first) return restart;
    NodeRef curr = *first;
    for (;;) {
      // Stale reads are caught by the epoch check, but never index with NULL.
      if (curr.null()) goto from_head;
      if (d.is_marked(curr)) {
        auto succ = d.get_next(ctx, curr);
        if (!succ) return restart;
        if (!d.update_link(pred, curr, *succ)) goto from_head;
        if (victim && curr == *victim) d.note_unlinked(ctx, curr);
        curr = *succ;
        continue;
      }
      auto k = d.get_key(ctx, curr);
      if (!k) return restart;
      if (*k >= key) return Window{pred, curr, *k};
      pred = curr;
      auto next = d.get_next(ctx, curr);
      if (!next) return restart;
      curr = *next;
    }
  }

  Outcome<bool> lookup(Ctx& ctx, Key key) {
    Domain& d = *dom_;
    NodeRef curr = head_;
    for (;;) {
      auto next = d.get_next(ctx, curr);
      if (!next) return restart;
      curr = *next;
      if (curr.null()) return restart;
      auto k = d.get_key(ctx, curr);
      if (!k) return restart;
      if (*k >= key) return *k == key && !d.is_marked(curr);
    }
  }

  Domain* dom_;
  NodeRef head_;
  NodeRef tail_;
};

}  // namespace vbr
