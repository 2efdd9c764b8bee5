// vbr: benchmark and self-check driver.
//
//   vbr bench --scheme vbr --ds list --threads 1,4 --range 256 --profile 25i25d50r --ms 1000 --csv out.csv
//   vbr verify [--seed N] [--ms N] [--trace trace.txt]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "vbr/bench/config.hpp"
#include "vbr/bench/runner.hpp"
#include "vbr/verify/harness.hpp"

namespace {

using namespace vbr;

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::uint64_t ms = 500;
  std::size_t threads = 8;
  std::uint64_t reuses = 1'000'000;
  std::string trace;
};

struct Tally {
  int failed = 0;
  void line(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s %-40s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failed += !pass;
  }
};

template <class Set>
void sequential(Tally& tally, const VerifyOptions& o) {
  Instance<Set> inst(1, PoolConfig{}, 512);
  const auto r = verify::run_sequential_equivalence(inst.set(), inst.context(0), 100'000, o.seed);
  tally.line(std::string("sequential/") + SetTraits<Set>::name, r.ok(), r.str());
}

template <class Set>
void accounting(Tally& tally, const VerifyOptions& o, verify::OpTrace* trace = nullptr) {
  using Domain = typename Set::domain_type;
  verify::StressOptions so;
  std::size_t overflow = 0;
  if constexpr (std::is_same_v<Domain, NoReclDomain>) {
    // Without reuse every successful insert takes a fresh slot.
    overflow = static_cast<std::size_t>(std::min<std::uint64_t>(
        bench::kNoReclOpsPerMs * o.ms * so.profile.insert_pct / 100, bench::kMaxOverflowSlots));
  }
  Instance<Set> inst(o.threads, PoolConfig{}, 256, true, overflow);
  so.threads = o.threads;
  so.duration = std::chrono::milliseconds(o.ms);
  so.seed = o.seed;
  so.trace = trace;
  const auto r = verify::run_accounting_stress(inst, so);
  tally.line(std::string("accounting/") + Domain::name + "/" + SetTraits<Set>::name, r.ok(), r.str());
}

int run_verify(const VerifyOptions& o) {
  Tally tally;
  sequential<LockFreeList<VbrDomain>>(tally, o);
  sequential<HashSet<VbrDomain>>(tally, o);

  std::unique_ptr<verify::OpTrace> trace;
  if (!o.trace.empty()) trace = std::make_unique<verify::OpTrace>(o.threads);
  accounting<LockFreeList<VbrDomain>>(tally, o, trace.get());
  accounting<HashSet<VbrDomain>>(tally, o);
  accounting<LockFreeList<EbrDomain>>(tally, o);
  accounting<HashSet<EbrDomain>>(tally, o);
  accounting<LockFreeList<NoReclDomain>>(tally, o);
  accounting<HashSet<NoReclDomain>>(tally, o);
  if (trace) {
    std::ofstream f(o.trace);
    trace->dump(f);
    if (!f) {
      std::fprintf(stderr, "cannot write %s\n", o.trace.c_str());
      return 1;
    }
  }

  for (const auto& c : verify::run_directed_suite(o.seed, o.reuses)) tally.line("directed/" + c.name, c.pass, c.detail);
  std::printf("%d failed\n", tally.failed);
  return tally.failed == 0 ? 0 : 1;
}

int run_bench(const bench::BenchConfig& cfg) {
  const auto results = bench::run_sweep(cfg);
  if (cfg.csv.empty()) {
    bench::write_csv(results, std::cout);
  } else {
    bench::write_csv(results, cfg.csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Version based reclamation: benchmarks and checks"};
  app.require_subcommand(1);

  bench::BenchConfig bcfg;
  std::string profile_text;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Timed throughput runs, CSV output");
  try {
    bench::add_bench_options(*bench_cmd, bcfg, profile_text);
  } catch (const bench::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  VerifyOptions vopt;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the correctness checks; exit status 1 on any failure");
  verify_cmd->add_option("--seed", vopt.seed, "Seed for all generators");
  verify_cmd->add_option("--ms", vopt.ms, "Duration of each concurrent stress run");
  verify_cmd->add_option("--threads", vopt.threads, "Threads in the stress runs")->check(CLI::Range(2, 256));
  verify_cmd->add_option("--reuses", vopt.reuses, "Slot reuses required by the reuse-order check");
  verify_cmd->add_option("--trace", vopt.trace, "Write the VBR list stress history here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench_cmd) {
      bench::finish_config(bcfg, profile_text);
      return run_bench(bcfg);
    }
    return run_verify(vopt);
  } catch (const bench::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
