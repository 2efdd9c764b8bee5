#pragma once

// Fixed-time throughput runs: prefill to half the key range, then every
// worker draws (op, key) pairs from its own seeded generator until the
// deadline, polled every 64 operations.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "vbr/bench/config.hpp"
#include "vbr/instance.hpp"
#include "vbr/set.hpp"
#include "vbr/workload.hpp"

namespace vbr::bench {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchResult {
  Scheme scheme = Scheme::vbr;
  Structure structure = Structure::list;
  std::size_t threads = 1;
  Key key_range = 0;
  WorkloadProfile profile;
  std::uint64_t duration_ms = 0;
  std::size_t reps = 0;
  std::uint64_t ops = 0;  // mean over repetitions, rounded
  double mops = 0;
  std::uint64_t inserts = 0;
  std::uint64_t removes = 0;
  std::uint64_t reads = 0;
  std::uint64_t epoch_advances = 0;
  std::uint64_t restarts = 0;
  std::size_t peak_backlog = 0;  // largest over repetitions
};

/// Aggregate insert throughput assumed when sizing no-reclamation arenas
/// for timed runs. Memory is committed lazily, so this only bounds the
/// address space reserved.
inline constexpr std::uint64_t kNoReclOpsPerMs = 50'000;
inline constexpr std::size_t kMaxOverflowSlots = 40'000'000;

/// Pool layout for a run: the configured per-thread share plus room for the
/// prefill, and for the no-reclamation scheme an overflow region sized to
/// the expected number of inserts.
inline PoolConfig pool_for(const BenchConfig& cfg, std::size_t threads, std::size_t* overflow) {
  PoolConfig p = cfg.pool;
  p.slots_per_thread += (static_cast<std::size_t>(cfg.key_range) / 2 + threads - 1) / threads;
  *overflow = 0;
  if (cfg.scheme == Scheme::none) {
    const std::uint64_t inserts =
        cfg.ops_per_thread != 0 ? cfg.ops_per_thread * threads * cfg.profile.insert_pct / 100
                                : kNoReclOpsPerMs * cfg.duration_ms * cfg.profile.insert_pct / 100;
    *overflow = static_cast<std::size_t>(std::min<std::uint64_t>(inserts + p.slots_per_thread, kMaxOverflowSlots));
  }
  return p;
}

/// Inserts random distinct keys until exactly half of the range is present,
/// spreading the allocations over the given contexts round-robin.
template <class Set>
std::size_t prefill(Set& set, std::vector<typename Set::Ctx*> ctxs, Key key_range, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Key> dist(0, key_range - 1);
  const auto target = static_cast<std::size_t>(key_range / 2);
  std::size_t have = 0;
  while (have < target) {
    if (set.add(*ctxs[have % ctxs.size()], dist(rng))) ++have;
  }
  return have;
}

namespace detail {

struct RepStats {
  std::uint64_t ops = 0;
  std::uint64_t inserts = 0;
  std::uint64_t removes = 0;
  std::uint64_t reads = 0;
  std::uint64_t epoch_advances = 0;
  std::uint64_t restarts = 0;
  std::size_t peak_backlog = 0;
  std::uint64_t elapsed_ms = 0;
};

template <class Domain>
void collect_scheme_stats(Domain& dom, std::size_t threads, RepStats& out) {
  if constexpr (std::is_same_v<Domain, VbrDomain>) {
    out.epoch_advances = dom.epoch_read() - kFirstEpoch;
    for (std::size_t t = 0; t < threads; ++t) {
      out.restarts += dom.context(t).stats().rollbacks;
      out.peak_backlog += dom.context(t).pool().peak_retired();
    }
  } else if constexpr (std::is_same_v<Domain, EbrDomain>) {
    out.epoch_advances = dom.epoch_read() - kFirstEpoch;
    for (std::size_t t = 0; t < threads; ++t) {
      out.restarts += dom.context(t).stats().exhaustion_waits;
      out.peak_backlog += dom.context(t).pool().peak_retired();
    }
  } else {
    out.peak_backlog = dom.leak_count();
  }
}

template <class Set>
RepStats run_rep(const BenchConfig& cfg, std::size_t threads, std::size_t rep) {
  std::size_t overflow = 0;
  const PoolConfig pool = pool_for(cfg, threads, &overflow);
  Instance<Set> inst(threads, pool, static_cast<std::size_t>(cfg.key_range), false, overflow);
  const std::uint64_t seed = cfg.seed + rep * 0x100000001B3ull;

  std::vector<typename Set::Ctx*> ctxs;
  for (std::size_t t = 0; t < threads; ++t) ctxs.push_back(&inst.context(t));
  prefill(inst.set(), ctxs, cfg.key_range, seed);

  struct alignas(64) Counters {
    std::uint64_t ops = 0, inserts = 0, removes = 0, reads = 0;
  };
  std::vector<Counters> counters(threads);
  std::vector<std::exception_ptr> errors(threads);
  std::atomic<bool> go{false};
  std::atomic<std::size_t> ready{0};
  std::chrono::steady_clock::time_point deadline{};

  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      auto& ctx = inst.context(t);
      auto& set = inst.set();
      std::mt19937_64 rng(thread_seed(seed, t));
      std::uniform_int_distribution<Key> key_dist(0, cfg.key_range - 1);
      std::uniform_int_distribution<unsigned> roll(0, 99);
      Counters c;
      ready.fetch_add(1);
      while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
      try {
        for (std::uint64_t i = 0;; ++i) {
          if (cfg.ops_per_thread != 0) {
            if (i >= cfg.ops_per_thread) break;
          } else if (i % 64 == 0 && std::chrono::steady_clock::now() >= deadline) {
            break;
          }
          const Key k = key_dist(rng);
          switch (cfg.profile.pick(roll(rng))) {
            case WorkloadProfile::Op::insert:
              set.add(ctx, k);
              ++c.inserts;
              break;
            case WorkloadProfile::Op::remove:
              set.remove(ctx, k);
              ++c.removes;
              break;
            case WorkloadProfile::Op::read:
              (void)set.contains(ctx, k);
              ++c.reads;
              break;
          }
          ++c.ops;
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
      counters[t] = c;
    });
  }
  while (ready.load() != threads) std::this_thread::yield();
  const auto start = std::chrono::steady_clock::now();
  deadline = start + std::chrono::milliseconds(cfg.duration_ms);
  go.store(true, std::memory_order_release);
  for (auto& w : workers) w.join();
  const auto elapsed = std::chrono::steady_clock::now() - start;

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RepStats s;
  for (const auto& c : counters) {
    s.ops += c.ops;
    s.inserts += c.inserts;
    s.removes += c.removes;
    s.reads += c.reads;
  }
  s.elapsed_ms = static_cast<std::uint64_t>(
      std::max<std::int64_t>(1, std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()));
  collect_scheme_stats(inst.domain(), threads, s);
  return s;
}

template <class Set>
BenchResult run_reps(const BenchConfig& cfg, std::size_t threads) {
  BenchResult r;
  r.scheme = cfg.scheme;
  r.structure = cfg.structure;
  r.threads = threads;
  r.key_range = cfg.key_range;
  r.profile = cfg.profile;
  r.reps = cfg.reps;
  double ops = 0, ins = 0, rem = 0, rd = 0, adv = 0, rst = 0, ms = 0;
  for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
    const RepStats s = run_rep<Set>(cfg, threads, rep);
    ops += static_cast<double>(s.ops);
    ins += static_cast<double>(s.inserts);
    rem += static_cast<double>(s.removes);
    rd += static_cast<double>(s.reads);
    adv += static_cast<double>(s.epoch_advances);
    rst += static_cast<double>(s.restarts);
    ms += static_cast<double>(s.elapsed_ms);
    r.peak_backlog = std::max(r.peak_backlog, s.peak_backlog);
  }
  const double n = static_cast<double>(cfg.reps);
  auto avg = [&](double v) { return static_cast<std::uint64_t>(std::llround(v / n)); };
  r.ops = avg(ops);
  r.inserts = avg(ins);
  r.removes = avg(rem);
  r.reads = avg(rd);
  r.epoch_advances = avg(adv);
  r.restarts = avg(rst);
  r.duration_ms = cfg.ops_per_thread != 0 ? std::max<std::uint64_t>(1, avg(ms)) : cfg.duration_ms;
  r.mops = static_cast<double>(r.ops) / static_cast<double>(r.duration_ms) / 1000.0;
  return r;
}

template <class Domain>
BenchResult run_structure(const BenchConfig& cfg, std::size_t threads) {
  if (cfg.structure == Structure::list) return run_reps<LockFreeList<Domain>>(cfg, threads);
  return run_reps<HashSet<Domain>>(cfg, threads);
}

}  // namespace detail

/// One averaged result for `threads` workers.
inline BenchResult run_benchmark(const BenchConfig& cfg, std::size_t threads) {
  switch (cfg.scheme) {
    case Scheme::vbr: return detail::run_structure<VbrDomain>(cfg, threads);
    case Scheme::ebr: return detail::run_structure<EbrDomain>(cfg, threads);
    case Scheme::none: return detail::run_structure<NoReclDomain>(cfg, threads);
  }
  throw std::logic_error("unknown scheme");
}

/// One result per entry of cfg.threads.
inline std::vector<BenchResult> run_sweep(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<BenchResult> out;
  for (auto t : cfg.threads) out.push_back(run_benchmark(cfg, t));
  return out;
}

inline constexpr const char* kCsvHeader =
    "scheme,structure,threads,key_range,profile,duration_ms,ops,mops,epoch_advances,restarts";

inline void write_csv(const std::vector<BenchResult>& results, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const auto& r : results) {
    os << to_string(r.scheme) << ',' << to_string(r.structure) << ',' << r.threads << ',' << r.key_range << ','
       << r.profile.str() << ',' << r.duration_ms << ',' << r.ops << ',' << std::fixed << std::setprecision(6)
       << r.mops << std::defaultfloat << ',' << r.epoch_advances << ',' << r.restarts << '\n';
  }
}

inline void write_csv(const std::vector<BenchResult>& results, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_csv(results, f);
  f.flush();
  if (!f) throw IoError("write to " + path + " failed");
}

}  // namespace vbr::bench
