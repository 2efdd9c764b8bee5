// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances and sizes are fixed here so a run is reproducible.

#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "vbr/bench/config.hpp"
#include "vbr/bench/runner.hpp"
#include "vbr/instance.hpp"
#include "vbr/set.hpp"
#include "vbr/verify/harness.hpp"

namespace {

using namespace vbr;
using namespace vbr::verify;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

constexpr std::size_t kSeqOps = 100'000;
constexpr double kSeqMaxSeconds = 10.0;

constexpr std::size_t kStressThreads = 8;
constexpr Key kStressRange = 256;
constexpr auto kStressDuration = std::chrono::milliseconds(2000);
// Lazily committed; covers every insert a no-reclamation run can make in 2 s.
constexpr std::size_t kNoReclOverflow = 30'000'000;

constexpr int kAbaReplays = 100;
constexpr std::uint64_t kMinReuses = 1'000'000;
constexpr std::size_t kDoubleAllocTrials = 100;
constexpr std::uint64_t kMinRollbacks = 1000;
constexpr std::uint32_t kKickOneIn = 50;
constexpr double kBacklogRatio = 10.0;
constexpr double kBenchMaxSeconds = 120.0;
constexpr std::uint64_t kBenchMs = 200;

int g_failed = 0;

void verdict(const char* name, bool pass, const std::string& detail) {
  std::printf("%s %-26s %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  g_failed += !pass;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Link-version write-site checks seen over every monitored run.
struct VersionTally {
  std::uint64_t violations = 0;
  std::uint64_t mismatches = 0;
  std::uint64_t runs = 0;
  void add(std::uint64_t v, std::uint64_t m) {
    violations += v;
    mismatches += m;
    ++runs;
  }
};

template <class Set>
bool sequential_runs(std::ostringstream& detail) {
  bool ok = true;
  double worst = 0;
  for (auto seed : kSeeds) {
    Instance<Set> inst(1, PoolConfig{}, 512);
    const auto t0 = Clock::now();
    const auto r = run_sequential_equivalence(inst.set(), inst.context(0), kSeqOps, seed);
    const double s = seconds_since(t0);
    worst = std::max(worst, s);
    if (!r.ok() || s >= kSeqMaxSeconds) {
      ok = false;
      detail << SetTraits<Set>::name << " seed " << seed << ": " << r.str() << " in " << s << " s; ";
    }
  }
  detail << SetTraits<Set>::name << " worst " << worst << " s; ";
  return ok;
}

template <class Set>
bool accounting_runs(std::ostringstream& detail, VersionTally& versions) {
  using Domain = typename Set::domain_type;
  bool ok = true;
  std::uint64_t ops = 0;
  for (auto seed : kSeeds) {
    const std::size_t overflow = std::is_same_v<Domain, NoReclDomain> ? kNoReclOverflow : 0;
    Instance<Set> inst(kStressThreads, PoolConfig{}, static_cast<std::size_t>(kStressRange), true, overflow);
    StressOptions o;
    o.threads = kStressThreads;
    o.key_range = kStressRange;
    o.duration = kStressDuration;
    o.seed = seed;
    const auto r = run_accounting_stress(inst, o);
    ops += r.ops;
    if constexpr (Domain::versioned) versions.add(r.version_violations, r.version_mismatches);
    if (!r.ok()) {
      ok = false;
      detail << Domain::name << '/' << SetTraits<Set>::name << " seed " << seed << ": " << r.str() << "; ";
    }
  }
  detail << Domain::name << '/' << SetTraits<Set>::name << ' ' << ops << " ops; ";
  return ok;
}

void sequential_criterion() {
  std::ostringstream d;
  const bool a = sequential_runs<LockFreeList<VbrDomain>>(d);
  const bool b = sequential_runs<HashSet<VbrDomain>>(d);
  verdict("sequential-oracle", a && b, d.str());
}

void accounting_criterion(VersionTally& versions) {
  std::ostringstream d;
  bool ok = accounting_runs<LockFreeList<VbrDomain>>(d, versions);
  ok &= accounting_runs<HashSet<VbrDomain>>(d, versions);
  ok &= accounting_runs<LockFreeList<EbrDomain>>(d, versions);
  ok &= accounting_runs<HashSet<EbrDomain>>(d, versions);
  ok &= accounting_runs<LockFreeList<NoReclDomain>>(d, versions);
  ok &= accounting_runs<HashSet<NoReclDomain>>(d, versions);
  verdict("concurrent-accounting", ok, d.str());
}

void aba_criterion() {
  int prevented = 0;
  int anomalies = 0;
  std::string first_bad;
  for (int i = 0; i < kAbaReplays; ++i) {
    const auto r = run_threaded_aba(false);
    if (!r.stale_cas_succeeded && r.slot_reused && r.d_reachable) {
      ++prevented;
    } else if (first_bad.empty()) {
      first_bad = r.str();
    }
    const auto f = run_threaded_aba(true);
    anomalies += f.slot_reused && f.stale_cas_succeeded && !f.d_reachable;
  }
  std::ostringstream d;
  d << "stale CAS rejected " << prevented << '/' << kAbaReplays << ", version check removed: anomaly in "
    << anomalies << '/' << kAbaReplays;
  if (!first_bad.empty()) d << "; first bad replay: " << first_bad;
  verdict("aba-prevention", prevented == kAbaReplays && anomalies >= 1, d.str());
}

void reuse_criterion(VersionTally& versions) {
  const auto r = run_reuse_churn(4, kMinReuses, 11);
  versions.add(r.version_violations, r.version_mismatches);
  std::string detail = r.str();
  if (!r.lines.empty()) detail += "; first: " + r.lines.front();
  verdict("slot-reuse-order", r.reuses >= kMinReuses && r.violations == 0 && r.worker_errors.empty() &&
                                  r.structure_error.empty(),
          detail);
}

void drain_criterion(VersionTally& versions) {
  const auto r = run_rollback_drain(4, kMinRollbacks, 13, {}, 64, kKickOneIn);
  versions.add(r.monitor_violations, 0);
  verdict("rollback-drain", r.ok(kMinRollbacks), r.str());
}

void version_criterion(const VersionTally& v) {
  std::ostringstream d;
  d << v.violations << " write-site violations, " << v.mismatches << " stale reachable versions over " << v.runs
    << " monitored runs";
  verdict("link-version", v.violations == 0 && v.mismatches == 0 && v.runs > 0, d.str());
}

void double_alloc_criterion() {
  const auto r = run_double_alloc(kDoubleAllocTrials);
  verdict("double-alloc", r.ok() && r.trials == kDoubleAllocTrials, r.str());
}

void bounded_memory_criterion() {
  StallOptions o;  // 7 workers, 10^7 ops, 4096 slots per context
  const auto v = run_stalled_churn<VbrDomain>(o);
  const auto e = run_stalled_churn<EbrDomain>(o);
  std::ostringstream d;
  d << "vbr: " << v.str() << "; ebr: " << e.str();
  const bool ok = v.reader_stalled && e.reader_stalled && v.exhausted_workers == 0 && v.ops == o.total_ops / o.workers * o.workers &&
                  v.structure_error.empty() && v.worker_errors.empty() &&
                  static_cast<double>(e.peak_backlog) > kBacklogRatio * static_cast<double>(v.peak_backlog);
  verdict("bounded-memory", ok, d.str());
}

void bench_criterion() {
  using namespace vbr::bench;
  const auto t0 = Clock::now();
  std::vector<BenchResult> all;
  std::string error;
  try {
    for (const char* profile : {"10i10d80r", "25i25d50r", "50i50d0r"}) {
      for (Structure ds : {Structure::list, Structure::hash}) {
        for (Scheme scheme : {Scheme::vbr, Scheme::ebr, Scheme::none}) {
          BenchConfig c;
          c.scheme = scheme;
          c.structure = ds;
          c.profile = WorkloadProfile::parse(profile);
          c.threads = {1, 4};
          c.duration_ms = kBenchMs;
          c.reps = 1;
          const auto rs = run_sweep(c);
          all.insert(all.end(), rs.begin(), rs.end());
        }
      }
    }
  } catch (const std::exception& ex) {
    error = ex.what();
  }
  const double secs = seconds_since(t0);

  std::ostringstream csv;
  write_csv(all, csv);
  std::istringstream in(csv.str());
  std::string line;
  std::size_t rows = 0;
  std::size_t bad_rows = 0;
  std::size_t zero_mops = 0;
  const auto columns = [](const std::string& l) { return std::count(l.begin(), l.end(), ',') + 1; };
  const bool header_ok = std::getline(in, line) && line == kCsvHeader;
  while (std::getline(in, line)) {
    ++rows;
    if (columns(line) != columns(kCsvHeader)) ++bad_rows;
  }
  for (const auto& r : all) zero_mops += !(r.mops > 0);

  std::ostringstream d;
  d << rows << " rows in " << secs << " s, " << bad_rows << " malformed, " << zero_mops << " with zero throughput";
  if (!error.empty()) d << "; error: " << error;
  verdict("bench-smoke", error.empty() && header_ok && rows == 36 && bad_rows == 0 && zero_mops == 0 &&
                             secs < kBenchMaxSeconds,
          d.str());
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  VersionTally versions;
  sequential_criterion();
  accounting_criterion(versions);
  aba_criterion();
  reuse_criterion(versions);
  double_alloc_criterion();
  bounded_memory_criterion();
  drain_criterion(versions);
  version_criterion(versions);
  bench_criterion();
  std::printf("%d failed, %.1f s\n", g_failed, seconds_since(t0));
  return g_failed == 0 ? 0 : 1;
}
