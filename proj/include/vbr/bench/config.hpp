#pragma once

// Benchmark configuration and its command-line surface.

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vbr/pools.hpp"
#include "vbr/types.hpp"
#include "vbr/workload.hpp"

namespace vbr::bench {

enum class Scheme { vbr, ebr, none };
enum class Structure { list, hash };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::vbr: return "vbr";
    case Scheme::ebr: return "ebr";
    case Scheme::none: return "none";
  }
  return "?";
}

inline const char* to_string(Structure s) { return s == Structure::list ? "list" : "hash"; }

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BenchConfig {
  Scheme scheme = Scheme::vbr;
  Structure structure = Structure::list;
  std::vector<std::size_t> threads{1};  // one result per entry
  Key key_range = 256;
  std::uint64_t duration_ms = 1000;
  std::uint64_t seed = 42;
  WorkloadProfile profile{25, 25, 50};
  PoolConfig pool;
  std::size_t reps = 10;
  std::uint64_t ops_per_thread = 0;  // nonzero: fixed op count instead of a deadline
  std::string csv;                   // empty: stdout

  void validate() const {
    if (threads.empty()) throw UsageError("--threads needs at least one value");
    for (auto t : threads)
      if (t < 1) throw UsageError("--threads must be >= 1");
    if (key_range < 2) throw UsageError("--range must be >= 2");
    if (reps < 1) throw UsageError("--reps must be >= 1");
    if (duration_ms < 1 && ops_per_thread == 0) throw UsageError("--ms must be >= 1");
    try {
      pool.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

/// Pool threshold from VBR_RETIRED_THRESHOLD when set; `fallback` otherwise.
inline std::size_t retired_threshold_from_env(std::size_t fallback) {
  const char* v = std::getenv("VBR_RETIRED_THRESHOLD");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) throw UsageError(std::string("bad VBR_RETIRED_THRESHOLD '") + v + "'");
  return static_cast<std::size_t>(n);
}

/// Registers the bench flags on `app`. Call finish_config() after parsing.
inline void add_bench_options(CLI::App& app, BenchConfig& cfg, std::string& profile_text) {
  cfg.pool.retired_threshold = retired_threshold_from_env(cfg.pool.retired_threshold);
  profile_text = cfg.profile.str();
  app.add_option("--scheme", cfg.scheme, "Reclamation scheme")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Scheme>{{"vbr", Scheme::vbr}, {"ebr", Scheme::ebr}, {"none", Scheme::none}}));
  app.add_option("--ds", cfg.structure, "Data structure")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Structure>{{"list", Structure::list}, {"hash", Structure::hash}}));
  app.add_option("--threads", cfg.threads, "Worker threads, comma separated for a sweep")->delimiter(',');
  app.add_option("--range", cfg.key_range, "Key range; keys are drawn from [0, range)");
  app.add_option("--profile", profile_text, "Operation mix, e.g. 10i10d80r");
  app.add_option("--ms", cfg.duration_ms, "Duration of one run in milliseconds");
  app.add_option("--ops", cfg.ops_per_thread, "Fixed operations per thread instead of a duration");
  app.add_option("--seed", cfg.seed, "Seed for prefill and the per-thread generators");
  app.add_option("--reps", cfg.reps, "Repetitions averaged per row");
  app.add_option("--csv", cfg.csv, "Output CSV path (default stdout)");
  app.add_option("--slots-per-thread", cfg.pool.slots_per_thread, "Arena slots per thread");
  app.add_option("--retired-threshold", cfg.pool.retired_threshold, "Retired list flush threshold");
  app.add_option("--steal-batch", cfg.pool.steal_batch, "Slots moved per global pool transfer");
}

inline void finish_config(BenchConfig& cfg, const std::string& profile_text) {
  try {
    cfg.profile = WorkloadProfile::parse(profile_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.validate();
}

/// Parses bench flags (argv[0] is the program name).
inline BenchConfig parse_config(int argc, const char* const* argv) {
  BenchConfig cfg;
  std::string profile_text;
  CLI::App app{"bench"};
  add_bench_options(app, cfg, profile_text);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  finish_config(cfg, profile_text);
  return cfg;
}

inline BenchConfig parse_config(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"bench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_config(static_cast<int>(argv.size()), argv.data());
}

}  // namespace vbr::bench
