#pragma once

// Correctness drivers: sequential oracle replay, concurrent per-key
// accounting, the three-node reuse script, and directed invariant checks.
// Every run is reproducible from its seed and thread count (timing aside).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vbr/hooks.hpp"
#include "vbr/instance.hpp"
#include "vbr/set.hpp"
#include "vbr/verify/oracle.hpp"
#include "vbr/verify/schedule.hpp"
#include "vbr/workload.hpp"

namespace vbr::verify {

/// Wraps each worker's body, e.g. to install a hook handler for its lifetime.
using WorkerWrap = std::function<void(std::size_t tid, const std::function<void()>& body)>;

namespace detail {

inline void run_workers(std::size_t n, const WorkerWrap& wrap, const std::function<void(std::size_t)>& body,
                        std::vector<std::string>& errors) {
  std::mutex mu;
  std::vector<std::thread> ts;
  ts.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    ts.emplace_back([&, t] {
      try {
        if (wrap) {
          wrap(t, [&] { body(t); });
        } else {
          body(t);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        errors.push_back("thread " + std::to_string(t) + ": " + e.what());
      }
    });
  }
  for (auto& t : ts) t.join();
}

template <class Set>
void prefill_half(Set& set, typename Set::Ctx& ctx, Key key_range, std::uint64_t seed,
                  std::vector<std::int64_t>* counts = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Key> dist(0, key_range - 1);
  const auto target = static_cast<std::size_t>(key_range / 2);
  std::size_t have = 0;
  while (have < target) {
    const Key k = dist(rng);
    if (set.add(ctx, k)) {
      ++have;
      if (counts) ++(*counts)[static_cast<std::size_t>(k)];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sequential equivalence

struct Divergence {
  std::size_t index;
  OpKind op;
  Key key;
  bool expected;
  bool got;
};

struct SequentialReport {
  std::size_t ops = 0;
  std::optional<Divergence> divergence;
  std::string structure_error;  // final content or shape mismatch

  [[nodiscard]] bool ok() const { return !divergence && structure_error.empty(); }
  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    if (divergence) {
      os << "divergence at op " << divergence->index << ": " << static_cast<char>(divergence->op) << '('
         << divergence->key << ") expected " << divergence->expected << " got " << divergence->got;
    } else if (!structure_error.empty()) {
      os << structure_error;
    } else {
      os << ops << " ops, no divergence";
    }
    return os.str();
  }
};

/// Replays a seeded stream of uniformly mixed ops on `set` and on an
/// OracleSet, stopping at the first differing result.
template <class Set>
SequentialReport run_sequential_equivalence(Set& set, typename Set::Ctx& ctx, std::size_t ops,
                                            std::uint64_t seed, Key key_range = 512, OpTrace* trace = nullptr) {
  SequentialReport rep;
  OracleSet oracle;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Key> key_dist(0, key_range - 1);
  std::uniform_int_distribution<int> op_dist(0, 2);
  for (std::size_t i = 0; i < ops; ++i) {
    const Key k = key_dist(rng);
    const auto op = static_cast<OpKind>("arc"[op_dist(rng)]);
    bool want = false;
    bool got = false;
    switch (op) {
      case OpKind::add:
        want = oracle.add(k);
        got = set.add(ctx, k);
        break;
      case OpKind::remove:
        want = oracle.remove(k);
        got = set.remove(ctx, k);
        break;
      case OpKind::contains:
        want = oracle.contains(k);
        got = set.contains(ctx, k);
        break;
    }
    if (trace) trace->record(0, op, k, got);
    rep.ops = i + 1;
    if (want != got) {
      rep.divergence = Divergence{i, op, k, want, got};
      return rep;
    }
  }
  if (auto err = set.validate(); !err.empty()) {
    rep.structure_error = err;
    return rep;
  }
  auto keys = set.snapshot();
  std::sort(keys.begin(), keys.end());
  if (keys != oracle.keys()) rep.structure_error = "final contents differ from oracle";
  return rep;
}

// ---------------------------------------------------------------------------
// Concurrent per-key accounting

struct StressOptions {
  std::size_t threads = 8;
  Key key_range = 256;
  std::chrono::milliseconds duration{2000};
  std::uint64_t ops_per_thread = 0;  // when nonzero, replaces the duration
  std::uint64_t seed = 1;
  WorkloadProfile profile{40, 40, 20};
  bool prefill = true;
  WorkerWrap wrap;
  OpTrace* trace = nullptr;
};

struct AccountingViolation {
  Key key;
  std::int64_t delta;      // successful adds minus successful removes
  std::int64_t membership; // occurrences in the final structure
};

struct AccountingReport {
  std::uint64_t ops = 0;
  std::uint64_t adds = 0;
  std::uint64_t removes = 0;
  std::vector<AccountingViolation> violations;
  std::string structure_error;
  std::vector<std::string> worker_errors;
  std::uint64_t monitor_violations = 0;
  std::uint64_t version_violations = 0;
  std::size_t version_mismatches = 0;

  [[nodiscard]] bool ok() const {
    return violations.empty() && structure_error.empty() && worker_errors.empty() && monitor_violations == 0 &&
           version_violations == 0 && version_mismatches == 0;
  }
  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << ops << " ops, " << adds << " adds, " << removes << " removes, " << violations.size()
       << " accounting violations";
    if (!violations.empty()) {
      const auto& v = violations.front();
      os << " (first: key " << v.key << " delta " << v.delta << " membership " << v.membership << ')';
    }
    if (!structure_error.empty()) os << ", structure: " << structure_error;
    if (!worker_errors.empty()) os << ", worker error: " << worker_errors.front();
    if (monitor_violations || version_violations || version_mismatches)
      os << ", monitor " << monitor_violations << '/' << version_violations << '/' << version_mismatches;
    return os.str();
  }
};

template <class Set>
AccountingReport run_accounting_stress(Instance<Set>& inst, const StressOptions& opt) {
  AccountingReport rep;
  const auto range = static_cast<std::size_t>(opt.key_range);
  std::vector<std::vector<std::int64_t>> adds(opt.threads, std::vector<std::int64_t>(range, 0));
  std::vector<std::vector<std::int64_t>> removes(opt.threads, std::vector<std::int64_t>(range, 0));
  std::vector<std::uint64_t> ops(opt.threads, 0);
  if (opt.prefill) detail::prefill_half(inst.set(), inst.context(0), opt.key_range, opt.seed, &adds[0]);

  const auto deadline = std::chrono::steady_clock::now() + opt.duration;
  detail::run_workers(
      opt.threads, opt.wrap,
      [&](std::size_t t) {
        auto& ctx = inst.context(t);
        auto& set = inst.set();
        std::mt19937_64 rng(thread_seed(opt.seed, t));
        std::uniform_int_distribution<Key> key_dist(0, opt.key_range - 1);
        std::uniform_int_distribution<unsigned> roll(0, 99);
        for (std::uint64_t i = 0;; ++i) {
          if (opt.ops_per_thread != 0) {
            if (i >= opt.ops_per_thread) break;
          } else if (i % 64 == 0 && std::chrono::steady_clock::now() >= deadline) {
            break;
          }
          const Key k = key_dist(rng);
          const auto idx = static_cast<std::size_t>(k);
          switch (opt.profile.pick(roll(rng))) {
            case WorkloadProfile::Op::insert: {
              const bool ok = set.add(ctx, k);
              adds[t][idx] += ok;
              if (opt.trace) opt.trace->record(t, OpKind::add, k, ok);
              break;
            }
            case WorkloadProfile::Op::remove: {
              const bool ok = set.remove(ctx, k);
              removes[t][idx] += ok;
              if (opt.trace) opt.trace->record(t, OpKind::remove, k, ok);
              break;
            }
            case WorkloadProfile::Op::read: {
              const bool ok = set.contains(ctx, k);
              if (opt.trace) opt.trace->record(t, OpKind::contains, k, ok);
              break;
            }
          }
          ++ops[t];
        }
      },
      rep.worker_errors);

  for (auto n : ops) rep.ops += n;
  std::vector<std::int64_t> membership(range, 0);
  for (const Key k : inst.set().snapshot()) {
    if (k < 0 || k >= opt.key_range) {
      rep.structure_error = "unexpected key " + std::to_string(k);
      continue;
    }
    ++membership[static_cast<std::size_t>(k)];
  }
  for (std::size_t k = 0; k < range; ++k) {
    std::int64_t a = 0;
    std::int64_t r = 0;
    for (std::size_t t = 0; t < opt.threads; ++t) {
      a += adds[t][k];
      r += removes[t][k];
    }
    rep.adds += static_cast<std::uint64_t>(a);
    rep.removes += static_cast<std::uint64_t>(r);
    if (a - r != membership[k] || membership[k] > 1)
      rep.violations.push_back(AccountingViolation{static_cast<Key>(k), a - r, membership[k]});
  }
  if (rep.structure_error.empty()) rep.structure_error = inst.set().validate();
  if (const InvariantMonitor* m = inst.monitor()) {
    rep.monitor_violations = m->violations();
    rep.version_violations = m->version_violations();
  }
  if constexpr (Set::domain_type::versioned) rep.version_mismatches = inst.set().version_mismatches();
  return rep;
}

// ---------------------------------------------------------------------------
// Three-node reuse script: T1 holds references n -> m -> k and is about to
// unlink m; meanwhile T2 removes m and its slot is reused for a new node d
// inserted right after n. T1's update_link(n, m, k) must then fail.

enum class AbaVariant { reuse, no_interference };

struct AbaReport {
  bool stale_cas_succeeded = false;
  bool slot_reused = false;        // d occupies m's slot
  bool d_reachable = false;        // key 25 still in the list
  bool m_unlinked = false;         // key 20 no longer in the list
  epoch_t m_birth = 0;
  epoch_t m_retire = 0;
  epoch_t d_birth = 0;
  std::vector<Key> final_keys;

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << "stale_cas=" << stale_cas_succeeded << " reused=" << slot_reused << " d_reachable=" << d_reachable
       << " m_unlinked=" << m_unlinked << " m=(" << m_birth << ',' << m_retire << ") d_birth=" << d_birth
       << " keys={";
    for (std::size_t i = 0; i < final_keys.size(); ++i) os << (i ? "," : "") << final_keys[i];
    os << '}';
    return os.str();
  }
};

inline constexpr Key kAbaN = 10;
inline constexpr Key kAbaM = 20;
inline constexpr Key kAbaK = 30;
inline constexpr Key kAbaD = 25;

/// Pool settings under which a just-retired slot is the next one handed out.
inline PoolConfig aba_pool_config() { return PoolConfig{16, 1, 4}; }

/// T1's view of the list: references to the nodes holding 10, 20, 30.
struct AbaSnapshot {
  NodeRef n, m, k;
};

/// Reads n, m, k from the head under T1's current epoch. Returns nullopt on Restart.
inline std::optional<AbaSnapshot> aba_snapshot(VbrDomain& d, ThreadCtx& ctx, NodeRef head) {
  auto n = d.get_next(ctx, head);
  if (!n) return std::nullopt;
  auto m = d.get_next(ctx, *n);
  if (!m) return std::nullopt;
  auto k = d.get_next(ctx, *m);
  if (!k) return std::nullopt;
  return AbaSnapshot{*n, *m, *k};
}

/// T2's part of the script: remove m, then insert d (reusing m's slot).
/// Returns the epoch m was retired at.
inline epoch_t aba_interfere(LockFreeList<VbrDomain>& list, ThreadCtx& ctx, slot_id m_slot) {
  list.remove(ctx, kAbaM);
  const epoch_t retired_at = list.domain().raw(m_slot).retire;
  list.add(ctx, kAbaD);
  return retired_at;
}

inline void aba_fill(LockFreeList<VbrDomain>& list, ThreadCtx& ctx) {
  list.add(ctx, kAbaN);
  list.add(ctx, kAbaM);
  list.add(ctx, kAbaK);
}

inline AbaReport aba_collect(const Instance<LockFreeList<VbrDomain>>& inst, const AbaSnapshot& s, bool cas) {
  AbaReport rep;
  rep.stale_cas_succeeded = cas;
  rep.m_birth = s.m.birth;
  const Cell& mc = inst.domain().raw(s.m.slot);
  rep.final_keys = inst.set().snapshot();
  auto has = [&](Key k) { return std::find(rep.final_keys.begin(), rep.final_keys.end(), k) != rep.final_keys.end(); };
  rep.d_reachable = has(kAbaD);
  rep.m_unlinked = !has(kAbaM);
  if (mc.key == kAbaD && mc.birth > s.m.birth) {
    rep.slot_reused = true;
    rep.d_birth = mc.birth;
  }
  return rep;
}

/// Single-threaded replay of the script: the two logical threads use two
/// contexts and their steps are interleaved explicitly. `configure` runs on
/// the fresh domain (test builds use it to switch on fault injection).
inline AbaReport run_aba_script(AbaVariant variant = AbaVariant::reuse,
                                const std::function<void(VbrDomain&)>& configure = {}) {
  Instance<LockFreeList<VbrDomain>> inst(2, aba_pool_config(), 4);
  if (configure) configure(inst.domain());
  auto& d = inst.domain();
  auto& t1 = inst.context(0);
  auto& t2 = inst.context(1);
  aba_fill(inst.set(), t2);

  d.begin_op(t1);
  const auto snap = aba_snapshot(d, t1, inst.set().head());
  if (!snap) return AbaReport{};
  epoch_t m_retire = 0;
  if (variant == AbaVariant::reuse) m_retire = aba_interfere(inst.set(), t2, snap->m.slot);
  const bool cas = d.update_link(snap->n, snap->m, snap->k);
  d.end_op(t1);

  AbaReport rep = aba_collect(inst, *snap, cas);
  rep.m_retire = m_retire;
  return rep;
}

// ---------------------------------------------------------------------------
// Directed invariant checks

struct ReuseReport {
  std::uint64_t ops = 0;
  std::uint64_t reuses = 0;
  std::uint64_t violations = 0;
  std::uint64_t version_violations = 0;
  std::uint64_t link_writes = 0;
  std::size_t version_mismatches = 0;
  std::string structure_error;
  std::vector<std::string> worker_errors;
  std::vector<std::string> lines;

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << ops << " ops, " << reuses << " reuses, " << violations << " reuse violations, " << version_violations
       << " version violations over " << link_writes << " link writes, " << version_mismatches
       << " stale versions";
    if (!structure_error.empty()) os << ", structure: " << structure_error;
    if (!worker_errors.empty()) os << ", worker error: " << worker_errors.front();
    return os.str();
  }
};

/// Add/remove churn on a small key range with immediate recycling
/// (retired_threshold = 1) until the monitor has seen `min_reuses` reuses.
inline ReuseReport run_reuse_churn(std::size_t threads, std::uint64_t min_reuses, std::uint64_t seed,
                                   const WorkerWrap& wrap = {}, Key key_range = 64) {
  Instance<LockFreeList<VbrDomain>> inst(threads, PoolConfig{256, 1, 32}, static_cast<std::size_t>(key_range), true);
  ReuseReport rep;
  InvariantMonitor& mon = *inst.monitor();
  std::vector<std::uint64_t> ops(threads, 0);
  const std::uint64_t cap = std::max<std::uint64_t>(1'000'000, min_reuses * 40 / threads);
  detail::run_workers(
      threads, wrap,
      [&](std::size_t t) {
        auto& ctx = inst.context(t);
        std::mt19937_64 rng(thread_seed(seed, t));
        std::uniform_int_distribution<Key> key_dist(0, key_range - 1);
        for (std::uint64_t i = 0; i < cap; ++i) {
          if (i % 256 == 0 && mon.reuses() >= min_reuses) break;
          const Key k = key_dist(rng);
          if (rng() & 1) {
            inst.set().add(ctx, k);
          } else {
            inst.set().remove(ctx, k);
          }
          ++ops[t];
        }
      },
      rep.worker_errors);
  for (auto n : ops) rep.ops += n;
  rep.reuses = mon.reuses();
  rep.violations = mon.violations();
  rep.version_violations = mon.version_violations();
  rep.link_writes = mon.link_writes();
  rep.lines = mon.lines();
  rep.version_mismatches = inst.set().version_mismatches();
  rep.structure_error = inst.set().validate();
  return rep;
}

struct DoubleAllocReport {
  std::size_t trials = 0;
  std::size_t passed = 0;
  std::vector<std::string> failures;

  [[nodiscard]] bool ok() const { return trials != 0 && passed == trials; }
  [[nodiscard]] std::string str() const {
    std::string s = std::to_string(passed) + "/" + std::to_string(trials) + " trials";
    if (!failures.empty()) s += ", first failure: " + failures.front();
    return s;
  }
};

/// Retire a node at the current epoch so its slot is the next one handed
/// out, then allocate twice: the first call must restart after moving the
/// epoch on, the second must succeed with a later birth.
inline DoubleAllocReport run_double_alloc(std::size_t trials) {
  VbrDomain d(1, PoolConfig{8, 1, 1});
  auto& ctx = d.context(0);
  DoubleAllocReport rep;
  for (std::size_t i = 0; i < trials; ++i) {
    ++rep.trials;
    auto fail = [&](const std::string& why) { rep.failures.push_back("trial " + std::to_string(i) + ": " + why); };
    d.checkpoint(ctx);
    auto first = d.alloc(ctx, static_cast<Key>(i));
    if (!first) {
      fail("setup alloc restarted");
      d.rollback(ctx);
      continue;
    }
    d.checkpoint(ctx);  // published
    const epoch_t e = d.epoch_read();
    if (d.retire(ctx, *first).restarted()) {
      fail("retire restarted");
      d.rollback(ctx);
      continue;
    }
    auto a1 = d.alloc(ctx, static_cast<Key>(i));
    const epoch_t after1 = d.epoch_read();
    if (!a1.restarted()) {
      fail("first alloc did not restart");
      d.release_unpublished(ctx, *a1);
      continue;
    }
    if (after1 != e + 1) {
      fail("epoch moved from " + std::to_string(e) + " to " + std::to_string(after1));
      d.rollback(ctx);
      continue;
    }
    d.rollback(ctx);
    auto a2 = d.alloc(ctx, static_cast<Key>(i));
    if (!a2) {
      fail("second alloc restarted");
      d.rollback(ctx);
      continue;
    }
    if (a2->birth <= e) {
      fail("second birth " + std::to_string(a2->birth) + " not after retire " + std::to_string(e));
    } else {
      ++rep.passed;
    }
    d.release_unpublished(ctx, *a2);
  }
  return rep;
}

struct DrainReport {
  std::uint64_t ops = 0;
  std::uint64_t rollbacks = 0;
  std::size_t unaccounted = 0;   // unlinked but never retired
  std::size_t duplicates = 0;    // slots found in two places
  std::size_t pending = 0;       // left in pending_retire lists
  std::size_t unpublished = 0;
  std::uint64_t monitor_violations = 0;
  std::string structure_error;
  std::vector<std::string> worker_errors;

  [[nodiscard]] bool ok(std::uint64_t min_rollbacks) const {
    return rollbacks >= min_rollbacks && unaccounted == 0 && duplicates == 0 && pending == 0 && unpublished == 0 &&
           monitor_violations == 0 && structure_error.empty() && worker_errors.empty();
  }
  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << ops << " ops, " << rollbacks << " rollbacks, " << unaccounted << " unlinked-unretired, " << duplicates
       << " duplicated, " << pending << " pending, " << unpublished << " unpublished, " << monitor_violations
       << " monitor violations";
    if (!structure_error.empty()) os << ", structure: " << structure_error;
    if (!worker_errors.empty()) os << ", worker error: " << worker_errors.front();
    return os.str();
  }
};

#ifdef VBR_TEST_HOOKS
namespace detail {

// Advances the global epoch at one in `one_in` hook events, so the calling
// thread's next epoch-checked read restarts wherever it happens to be.
struct EpochKicker final : hooks::Handler {
  VbrDomain& dom;
  std::uint32_t one_in;
  std::mt19937 rng;
  EpochKicker(VbrDomain& d, std::uint32_t n, std::uint64_t seed)
      : dom(d), one_in(n), rng(static_cast<std::uint32_t>(seed)) {}
  void on_hook(hooks::Point) override {
    if (rng() % one_in == 0) dom.epoch_try_advance(dom.epoch_read());
  }
};

}  // namespace detail
#endif

/// Churn until at least `min_rollbacks` rollbacks happened in total, then
/// account for every slot at quiescence. With hooks compiled in and
/// `kick_one_in` nonzero, the epoch is also advanced at random hook points.
inline DrainReport run_rollback_drain(std::size_t threads, std::uint64_t min_rollbacks, std::uint64_t seed,
                                      const WorkerWrap& wrap = {}, Key key_range = 64,
                                      [[maybe_unused]] std::uint32_t kick_one_in = 0) {
  Instance<LockFreeList<VbrDomain>> inst(threads, PoolConfig{256, 1, 32}, static_cast<std::size_t>(key_range), true);
  DrainReport rep;
  std::atomic<std::uint64_t> rollbacks{0};
  std::vector<std::uint64_t> ops(threads, 0);
  constexpr std::uint64_t kCap = 4'000'000;
  detail::run_workers(
      threads, wrap,
      [&](std::size_t t) {
#ifdef VBR_TEST_HOOKS
        std::optional<detail::EpochKicker> kicker;
        std::optional<hooks::ScopedHandler> guard;
        if (kick_one_in != 0) {
          kicker.emplace(inst.domain(), kick_one_in, thread_seed(seed ^ 0x6b69636bu, t));
          guard.emplace(&*kicker);
        }
#endif
        auto& ctx = inst.context(t);
        std::mt19937_64 rng(thread_seed(seed, t));
        std::uniform_int_distribution<Key> key_dist(0, key_range - 1);
        std::uint64_t reported = 0;
        for (std::uint64_t i = 0; i < kCap; ++i) {
          if (i % 64 == 0) {
            const auto mine = ctx.stats().rollbacks;
            rollbacks.fetch_add(mine - reported);
            reported = mine;
            if (rollbacks.load() >= min_rollbacks) break;
          }
          const Key k = key_dist(rng);
          switch (rng() % 3) {
            case 0: inst.set().add(ctx, k); break;
            case 1: inst.set().remove(ctx, k); break;
            default: inst.set().contains(ctx, k); break;
          }
          ++ops[t];
        }
      },
      rep.worker_errors);
  for (std::size_t t = 0; t < threads; ++t) {
    rep.ops += ops[t];
    const auto& ctx = inst.context(t);
    rep.rollbacks += ctx.stats().rollbacks;
    rep.pending += ctx.pending_retire().size();
    rep.unpublished += ctx.unpublished().size();
  }
  rep.unaccounted = inst.unaccounted_slots(&rep.duplicates);
  rep.monitor_violations = inst.monitor()->violations() + inst.monitor()->version_violations();
  rep.structure_error = inst.set().validate();
  return rep;
}

// ---------------------------------------------------------------------------
// Churn next to a reader that is stuck in the middle of a traversal.

#ifdef VBR_TEST_HOOKS

struct StallOptions {
  std::size_t workers = 7;
  std::uint64_t total_ops = 10'000'000;
  Key key_range = 128;
  PoolConfig pool{4096, 64, 32};
  std::uint64_t seed = 7;
  std::chrono::microseconds sample_every{500};
};

struct StallReport {
  std::uint64_t ops = 0;
  std::size_t exhausted_workers = 0;
  std::size_t peak_backlog = 0;
  bool reader_stalled = false;
  std::string structure_error;
  std::vector<std::string> worker_errors;

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << ops << " ops, " << exhausted_workers << " workers hit pool exhaustion, peak retired backlog "
       << peak_backlog << (reader_stalled ? "" : ", reader never stalled");
    if (!structure_error.empty()) os << ", structure: " << structure_error;
    return os.str();
  }
};

/// Context `workers` enters contains() and blocks at its first link read
/// while contexts 0..workers-1 run add/remove churn.
template <class Domain>
StallReport run_stalled_churn(const StallOptions& opt) {
  Instance<LockFreeList<Domain>> inst(opt.workers + 1, opt.pool, static_cast<std::size_t>(opt.key_range));
  StallReport rep;
  detail::prefill_half(inst.set(), inst.context(0), opt.key_range, opt.seed);

  std::mutex mu;
  std::condition_variable cv;
  bool stalled = false;
  bool release = false;

  struct Staller final : hooks::Handler {
    std::mutex& mu;
    std::condition_variable& cv;
    bool& stalled;
    bool& release;
    Staller(std::mutex& m, std::condition_variable& c, bool& s, bool& r) : mu(m), cv(c), stalled(s), release(r) {}
    void on_hook(hooks::Point p) override {
      if (p != hooks::Point::after_read_link || stalled) return;
      std::unique_lock lock(mu);
      stalled = true;
      cv.notify_all();
      cv.wait(lock, [&] { return release; });
    }
  };

  std::thread reader([&] {
    Staller h(mu, cv, stalled, release);
    hooks::ScopedHandler guard(&h);
    (void)inst.set().contains(inst.context(opt.workers), opt.key_range - 1);
  });
  {
    std::unique_lock lock(mu);
    rep.reader_stalled = cv.wait_for(lock, std::chrono::seconds(10), [&] { return stalled; });
  }

  std::atomic<bool> running{true};
  std::atomic<std::size_t> exhausted{0};
  std::size_t peak = 0;
  std::thread sampler([&] {
    while (running.load()) {
      peak = std::max(peak, inst.domain().retired_backlog());
      std::this_thread::sleep_for(opt.sample_every);
    }
  });

  std::vector<std::uint64_t> ops(opt.workers, 0);
  const std::uint64_t per_worker = opt.total_ops / opt.workers;
  detail::run_workers(
      opt.workers, {},
      [&](std::size_t t) {
        auto& ctx = inst.context(t);
        std::mt19937_64 rng(thread_seed(opt.seed, t));
        std::uniform_int_distribution<Key> key_dist(0, opt.key_range - 1);
        try {
          for (std::uint64_t i = 0; i < per_worker; ++i) {
            const Key k = key_dist(rng);
            if (rng() & 1) {
              inst.set().add(ctx, k);
            } else {
              inst.set().remove(ctx, k);
            }
            ++ops[t];
          }
        } catch (const PoolExhausted&) {
          exhausted.fetch_add(1);
        }
      },
      rep.worker_errors);
  running.store(false);
  sampler.join();
  peak = std::max(peak, inst.domain().retired_backlog());

  {
    std::lock_guard lock(mu);
    release = true;
  }
  cv.notify_all();
  reader.join();

  for (auto n : ops) rep.ops += n;
  rep.exhausted_workers = exhausted.load();
  rep.peak_backlog = peak;
  rep.structure_error = inst.set().validate();
  return rep;
}

/// Threaded form of the reuse script: context 0 reads n -> m -> k and parks
/// at its CAS while context 1 removes m and inserts d into m's slot. With
/// `ignore_version` the domain compares link targets only.
inline AbaReport run_threaded_aba(bool ignore_version) {
  Instance<LockFreeList<VbrDomain>> inst(2, aba_pool_config(), 4);
  auto& d = inst.domain();
  d.set_fault_ignore_version(ignore_version);
  aba_fill(inst.set(), inst.context(1));

  using Action = ScheduleScript::Action;
  std::optional<AbaSnapshot> snap;
  bool cas = false;
  epoch_t m_retire = 0;
  ScheduleScript script(2, {{0, "start", Action::proceed},
                            {0, "before-cas", Action::hold},
                            {1, "start", Action::proceed},
                            {1, "done", Action::hold},
                            {0, "before-cas", Action::proceed},
                            {0, "done", Action::hold}});
  const bool ran = script.run({[&] {
                                 auto& t1 = inst.context(0);
                                 d.begin_op(t1);
                                 snap = aba_snapshot(d, t1, inst.set().head());
                                 if (snap) cas = d.update_link(snap->n, snap->m, snap->k);
                                 d.end_op(t1);
                               },
                               [&] {
                                 if (snap) m_retire = aba_interfere(inst.set(), inst.context(1), snap->m.slot);
                               }});
  if (!ran || !snap) return AbaReport{};
  AbaReport rep = aba_collect(inst, *snap, cas);
  rep.m_retire = m_retire;
  return rep;
}

#endif

// ---------------------------------------------------------------------------

struct DirectedResult {
  std::string name;
  bool pass;
  std::string detail;
};

/// The directed checks that need no hooks, as run by the `verify` command.
inline std::vector<DirectedResult> run_directed_suite(std::uint64_t seed = 1, std::uint64_t min_reuses = 1'000'000) {
  std::vector<DirectedResult> out;
  {
    const auto r = run_reuse_churn(4, min_reuses, seed);
    out.push_back({"slot-reuse-order", r.reuses >= min_reuses && r.violations == 0 && r.worker_errors.empty() &&
                                           r.structure_error.empty(),
                   r.str()});
    out.push_back({"link-version", r.version_violations == 0 && r.version_mismatches == 0 && r.link_writes > 0,
                   r.str()});
  }
  {
    const auto r = run_double_alloc(100);
    out.push_back({"double-alloc", r.ok(), r.str()});
  }
  {
    const auto r = run_rollback_drain(4, 1000, seed);
    out.push_back({"rollback-drain", r.ok(1000), r.str()});
  }
  {
    const auto r = run_aba_script(AbaVariant::reuse);
    out.push_back({"stale-cas-after-reuse", !r.stale_cas_succeeded && r.slot_reused && r.d_reachable, r.str()});
    const auto n = run_aba_script(AbaVariant::no_interference);
    out.push_back({"cas-without-interference", n.stale_cas_succeeded && n.m_unlinked, n.str()});
  }
  return out;
}

}  // namespace vbr::verify
