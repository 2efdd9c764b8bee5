#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>
#include <type_traits>
#include <vector>

#include "vbr/hooks.hpp"
#include "vbr/monitor.hpp"
#include "vbr/vbr.hpp"

using namespace vbr;

namespace {

PoolConfig small_pool(std::size_t threshold = 64) { return PoolConfig{threshold + 64, threshold, 8}; }

void advance_to(VbrDomain& d, epoch_t target) {
  while (d.epoch_read() < target) d.epoch_try_advance(d.epoch_read());
}

// Allocates a published node with the given key at the current epoch.
NodeRef published(VbrDomain& d, ThreadCtx& ctx, Key key) {
  d.checkpoint(ctx);
  auto r = d.alloc(ctx, key);
  EXPECT_TRUE(r);
  d.checkpoint(ctx);
  return *r;
}

}  // namespace

// ---- epoch ---------------------------------------------------------------

TEST(Epoch, FreshReadsOne) {
  VbrDomain d(1, small_pool());
  EXPECT_EQ(d.epoch_read(), 1u);
}

TEST(Epoch, OneAdvance) {
  VbrDomain d(1, small_pool());
  EXPECT_TRUE(d.epoch_try_advance(1));
  EXPECT_EQ(d.epoch_read(), 2u);
}

TEST(Epoch, KAdvancesMatchLoopCount) {
  VbrDomain d(1, small_pool());
  for (epoch_t k = 0; k < 37; ++k) {
    const epoch_t before = d.epoch_read();
    ASSERT_TRUE(d.epoch_try_advance(before));
    EXPECT_EQ(d.epoch_read(), 1 + (k + 1));
  }
}

TEST(Epoch, TryAdvanceSucceedsOnlyFromCurrent) {
  VbrDomain d(1, small_pool());
  advance_to(d, 5);
  EXPECT_TRUE(d.epoch_try_advance(5));
  EXPECT_EQ(d.epoch_read(), 6u);
  EXPECT_FALSE(d.epoch_try_advance(5));
  EXPECT_EQ(d.epoch_read(), 6u);
}

TEST(Epoch, RacingAdvanceHasOneWinner) {
  for (int round = 0; round < 200; ++round) {
    GlobalEpoch e;
    while (e.read() < 5) e.try_advance(e.read());
    std::atomic<int> wins{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> ts;
    for (int t = 0; t < 2; ++t) {
      ts.emplace_back([&] {
        while (!go.load()) std::this_thread::yield();
        wins += e.try_advance(5);
      });
    }
    go = true;
    for (auto& t : ts) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(e.read(), 6u);
  }
}

TEST(Epoch, SampledReadsAreMonotonePerThread) {
  VbrDomain d(1, small_pool());
  std::atomic<bool> stop{false};
  std::thread advancer([&] {
    for (int i = 0; i < 20000; ++i) d.epoch_try_advance(d.epoch_read());
    stop = true;
  });
  epoch_t last = 0;
  bool monotone = true;
  while (!stop.load()) {
    const epoch_t e = d.epoch_read();
    monotone &= e >= last;
    last = e;
  }
  advancer.join();
  EXPECT_TRUE(monotone);
}

// ---- alloc ---------------------------------------------------------------

TEST(Alloc, FreshSlotGetsCurrentEpochAndNullLink) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  advance_to(d, 7);
  d.checkpoint(ctx);
  auto r = d.alloc(ctx, 42);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->birth, 7u);
  const Cell& c = d.raw(r->slot);
  EXPECT_EQ(c.birth, 7u);
  EXPECT_EQ(c.retire, kNoEpoch);
  EXPECT_EQ(c.key, 42);
  EXPECT_EQ(c.link_word, 0u);
  EXPECT_EQ(c.link_version, 7u);
  ASSERT_EQ(ctx.unpublished().size(), 1u);
  EXPECT_EQ(ctx.unpublished()[0], r->slot);
}

TEST(Alloc, SlotRetiredAtMyEpochRestartsAndAdvances) {
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  advance_to(d, 5);
  const NodeRef n = published(d, ctx, 1);
  ASSERT_TRUE(d.retire(ctx, n));  // threshold 1: straight back to the alloc list
  EXPECT_EQ(d.raw(n.slot).retire, 5u);

  auto r = d.alloc(ctx, 2);
  EXPECT_TRUE(r.restarted());
  EXPECT_EQ(d.epoch_read(), 6u);
  EXPECT_EQ(ctx.stats().alloc_restarts, 1u);

  // The slot went back to the head: after refreshing, the next alloc reuses it.
  d.rollback(ctx);
  EXPECT_EQ(ctx.my_epoch(), 6u);
  auto again = d.alloc(ctx, 2);
  ASSERT_TRUE(again);
  EXPECT_EQ(again->slot, n.slot);
  EXPECT_EQ(again->birth, 6u);
  EXPECT_GT(again->birth, 5u);
}

TEST(Alloc, OfTwoConsecutiveCallsOneSucceeds) {
  // Random mixes of retires and allocs; a Restart is always followed by a Value.
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  std::mt19937_64 rng(11);
  std::vector<NodeRef> live;
  for (int i = 0; i < 20000; ++i) {
    d.checkpoint(ctx);
    if (live.size() > 32 || (!live.empty() && (rng() % 2))) {
      const std::size_t j = rng() % live.size();
      if (d.retire(ctx, live[j]).restarted()) d.rollback(ctx);
      live.erase(live.begin() + static_cast<long>(j));
      continue;
    }
    if (rng() % 8 == 0) d.epoch_try_advance(d.epoch_read());
    auto a = d.alloc(ctx, i);
    if (a.restarted()) {
      d.rollback(ctx);
      auto b = d.alloc(ctx, i);
      ASSERT_TRUE(b) << "two consecutive restarts at step " << i;
      a = b;
    }
    d.checkpoint(ctx);
    live.push_back(*a);
  }
}

TEST(Alloc, ExhaustedPoolThrows) {
  VbrDomain d(1, PoolConfig{3, 1, 1});
  auto& ctx = d.context(0);
  d.checkpoint(ctx);
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(d.alloc(ctx, i));
  EXPECT_THROW((void)d.alloc(ctx, 9), PoolExhausted);
}

// ---- retire --------------------------------------------------------------

TEST(Retire, StampsCurrentEpochAndQueues) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  advance_to(d, 9);
  const NodeRef n = published(d, ctx, 3);
  EXPECT_TRUE(d.retire(ctx, n));
  EXPECT_EQ(d.raw(n.slot).retire, 9u);
  EXPECT_EQ(ctx.pool().retired_size(), 1u);
}

TEST(Retire, SecondRetireIsNoop) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  advance_to(d, 4);
  const NodeRef n = published(d, ctx, 3);
  ASSERT_TRUE(d.retire(ctx, n));
  advance_to(d, 8);
  EXPECT_TRUE(d.retire(ctx, n));
  EXPECT_EQ(d.raw(n.slot).retire, 4u);
  EXPECT_EQ(ctx.pool().retired_size(), 1u);
}

TEST(Retire, LaterLifetimeIsNotRetired) {
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 3);
  ASSERT_TRUE(d.retire(ctx, n));
  d.epoch_try_advance(d.epoch_read());
  const NodeRef reused = published(d, ctx, 4);
  ASSERT_EQ(reused.slot, n.slot);
  EXPECT_TRUE(d.retire(ctx, n));  // stale reference: birth is now larger
  EXPECT_EQ(d.raw(n.slot).retire, kNoEpoch);
}

TEST(Retire, StaleEpochStampsNewEpochThenRestarts) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  advance_to(d, 9);
  const NodeRef n = published(d, ctx, 3);
  d.epoch_try_advance(9);
  auto r = d.retire(ctx, n);
  EXPECT_TRUE(r.restarted());
  EXPECT_EQ(d.raw(n.slot).retire, 10u);
  EXPECT_EQ(ctx.pool().retired_size(), 1u);
}

// ---- reads ---------------------------------------------------------------

TEST(GetNext, ReturnsSuccessorWithBirth) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef m = published(d, ctx, 2);
  d.epoch_try_advance(d.epoch_read());
  const NodeRef n = published(d, ctx, 1);
  ASSERT_TRUE(d.update_link(n, kNullRef, m));
  auto r = d.get_next(ctx, n);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, m);
}

TEST(GetNext, NullSuccessor) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 1);
  auto r = d.get_next(ctx, n);
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->null());
}

TEST(GetNext, EpochMovedRestarts) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 1);
  d.epoch_try_advance(d.epoch_read());
  EXPECT_TRUE(d.get_next(ctx, n).restarted());
}

TEST(GetKey, StableEpoch) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 17);
  auto k = d.get_key(ctx, n);
  ASSERT_TRUE(k);
  EXPECT_EQ(*k, 17);
}

TEST(GetKey, EpochMovedRestarts) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 17);
  d.epoch_try_advance(d.epoch_read());
  EXPECT_TRUE(d.get_key(ctx, n).restarted());
}

TEST(GetKey, RetiredButEpochUnchangedStillReadsKey) {
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 17);
  ASSERT_TRUE(d.retire(ctx, n));  // recyclable right away, but not reusable at this epoch
  auto k = d.get_key(ctx, n);
  ASSERT_TRUE(k);
  EXPECT_EQ(*k, 17);
  EXPECT_TRUE(d.alloc(ctx, 99).restarted());
}

TEST(IsMarked, LiveUnmarked) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  EXPECT_FALSE(d.is_marked(published(d, ctx, 1)));
}

TEST(IsMarked, AfterMark) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 1);
  ASSERT_TRUE(d.mark(n));
  EXPECT_TRUE(d.is_marked(n));
}

TEST(IsMarked, ReusedSlotCountsAsMarked) {
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  const NodeRef old = published(d, ctx, 1);
  ASSERT_TRUE(d.retire(ctx, old));
  advance_to(d, 12);
  const NodeRef fresh = published(d, ctx, 2);
  ASSERT_EQ(fresh.slot, old.slot);
  EXPECT_FALSE(d.is_marked(fresh));
  EXPECT_TRUE(d.is_marked(old));
}

TEST(IsMarked, NeverRestartsEvenWhenEpochMoves) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 1);
  d.epoch_try_advance(d.epoch_read());
  static_assert(std::is_same_v<decltype(d.is_marked(n)), bool>);
  EXPECT_FALSE(d.is_marked(n));
}

// ---- updates -------------------------------------------------------------

TEST(UpdateLink, VersionIsMaxOfBirths) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  advance_to(d, 3);
  const NodeRef x = published(d, ctx, 30);
  advance_to(d, 5);
  const NodeRef n = published(d, ctx, 10);
  ASSERT_TRUE(d.update_link(n, kNullRef, x));
  EXPECT_EQ(d.raw(n.slot).link_version, 5u);  // max(5, 3): the expected version below
  advance_to(d, 7);
  const NodeRef y = published(d, ctx, 20);
  ASSERT_TRUE(d.update_link(n, x, y));
  EXPECT_EQ(LinkWord::target(d.raw(n.slot).link_word), y.slot);
  EXPECT_EQ(d.raw(n.slot).link_version, 7u);
}

TEST(UpdateLink, NullTargetUsesBirthZero) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef m = published(d, ctx, 20);
  advance_to(d, 5);
  const NodeRef n = published(d, ctx, 10);
  ASSERT_TRUE(d.update_link(n, kNullRef, m));
  ASSERT_TRUE(d.update_link(n, m, kNullRef));
  EXPECT_EQ(d.raw(n.slot).link_word, 0u);
  EXPECT_EQ(d.raw(n.slot).link_version, 5u);
}

TEST(UpdateLink, FailsOnWrongExpectedOrMarkedOwner) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef a = published(d, ctx, 1);
  const NodeRef b = published(d, ctx, 2);
  const NodeRef c = published(d, ctx, 3);
  ASSERT_TRUE(d.update_link(a, kNullRef, b));
  EXPECT_FALSE(d.update_link(a, c, b));
  ASSERT_TRUE(d.mark(a));
  EXPECT_FALSE(d.update_link(a, b, c));
  static_assert(std::is_same_v<decltype(d.update_link(a, b, c)), bool>);
}

TEST(Mark, KeepsTargetAndVersion) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef m = published(d, ctx, 2);
  advance_to(d, 4);
  const NodeRef n = published(d, ctx, 1);
  ASSERT_TRUE(d.update_link(n, kNullRef, m));
  const LinkValue before = cell_ops::read_link(d.raw(n.slot));
  NodeRef sealed;
  ASSERT_TRUE(d.mark(n, &sealed));
  const LinkValue after = cell_ops::read_link(d.raw(n.slot));
  EXPECT_TRUE(LinkWord::marked(after.word));
  EXPECT_EQ(LinkWord::target(after.word), m.slot);
  EXPECT_EQ(after.version, before.version);
  EXPECT_EQ(sealed, m);
}

TEST(Mark, SecondMarkFails) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n = published(d, ctx, 1);
  ASSERT_TRUE(d.mark(n));
  EXPECT_FALSE(d.mark(n));
}

TEST(Mark, ReusedSlotFailsWithoutTouchingLink) {
  VbrDomain d(1, small_pool(1));
  auto& ctx = d.context(0);
  const NodeRef old = published(d, ctx, 1);
  ASSERT_TRUE(d.retire(ctx, old));
  d.epoch_try_advance(d.epoch_read());
  const NodeRef fresh = published(d, ctx, 2);
  ASSERT_EQ(fresh.slot, old.slot);
  const LinkValue before = cell_ops::read_link(d.raw(fresh.slot));
  EXPECT_FALSE(d.mark(old));
  EXPECT_EQ(cell_ops::read_link(d.raw(fresh.slot)), before);
}

// ---- checkpoints ---------------------------------------------------------

TEST(Checkpoint, RefreshesEpochAndPublishes) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  d.checkpoint(ctx);
  ASSERT_TRUE(d.alloc(ctx, 1));
  EXPECT_EQ(ctx.unpublished().size(), 1u);
  advance_to(d, 3);
  EXPECT_EQ(ctx.my_epoch(), 1u);
  d.checkpoint(ctx);
  EXPECT_EQ(ctx.my_epoch(), 3u);
  EXPECT_TRUE(ctx.unpublished().empty());
}

TEST(Rollback, ReturnsUnpublishedToAllocList) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  d.checkpoint(ctx);
  auto a = d.alloc(ctx, 5);
  ASSERT_TRUE(a);
  d.epoch_try_advance(d.epoch_read());
  d.rollback(ctx);
  EXPECT_TRUE(ctx.unpublished().empty());
  EXPECT_EQ(d.raw(a->slot).retire, kNoEpoch);
  auto b = d.alloc(ctx, 5);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->slot, a->slot);
}

TEST(Rollback, RetiresPendingBeforeRefreshingEpoch) {
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef n1 = published(d, ctx, 1);
  const NodeRef n2 = published(d, ctx, 2);
  d.note_unlinked(ctx, n1);
  d.note_unlinked(ctx, n2);
  ASSERT_TRUE(d.retire(ctx, n2));  // already handled: not retired twice
  const epoch_t r2 = d.raw(n2.slot).retire;
  advance_to(d, 6);
  d.rollback(ctx);
  EXPECT_EQ(d.raw(n1.slot).retire, 6u);
  EXPECT_EQ(d.raw(n2.slot).retire, r2);
  EXPECT_TRUE(ctx.pending_retire().empty());
  EXPECT_EQ(ctx.pool().retired_size(), 2u);
  EXPECT_EQ(ctx.my_epoch(), 6u);
}

// ---- hooks and monitor ---------------------------------------------------

TEST(Hooks, NamedPointsFire) {
  struct Recorder : hooks::Handler {
    std::vector<std::string> seen;
    void on_hook(hooks::Point p) override { seen.emplace_back(hooks::name(p)); }
  } rec;
  VbrDomain d(1, small_pool());
  auto& ctx = d.context(0);
  const NodeRef a = published(d, ctx, 1);
  const NodeRef b = published(d, ctx, 2);
  {
    hooks::ScopedHandler guard(&rec);
    (void)d.get_next(ctx, a);
    d.update_link(a, kNullRef, b);
    (void)d.retire(ctx, b);
  }
  EXPECT_EQ(rec.seen, (std::vector<std::string>{"after-read-link", "before-cas", "after-retire"}));
}

TEST(Monitor, ReportsReuseOrderViolationLine) {
  InvariantMonitor m(8);
  m.on_alloc(3, 1);
  m.on_mark(3);
  m.on_retire(3, 1, 4, 1);
  m.on_alloc(3, 4);  // birth must exceed the previous retire epoch
  EXPECT_EQ(m.violations(), 1u);
  ASSERT_EQ(m.lines().size(), 1u);
  EXPECT_EQ(m.lines()[0], "slot=3 kind=reuse-epoch-order lifetime=(1,4)→(4,…)");
}

TEST(Monitor, CleanLifecycleHasNoViolations) {
  InvariantMonitor m(4);
  m.on_alloc(0, 1);
  m.on_link_write(0, 1, 0, 1);
  m.on_mark(0);
  m.on_retire(0, 1, 2, 1);
  m.on_alloc(0, 3);
  m.on_release(0);
  m.on_alloc(0, 3);
  EXPECT_EQ(m.violations(), 0u);
  EXPECT_EQ(m.version_violations(), 0u);
  EXPECT_EQ(m.reuses(), 2u);
}

TEST(Monitor, FlagsBadLinkVersion) {
  InvariantMonitor m(4);
  m.on_link_write(1, 3, 5, 3);
  EXPECT_EQ(m.version_violations(), 1u);
}
