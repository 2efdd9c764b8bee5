#pragma once

#include <cstdint>
#include <regex>
#include <stdexcept>
#include <string>

namespace vbr {

/// Operation mix in percent: inserts, deletes, reads.
struct WorkloadProfile {
  unsigned insert_pct = 25;
  unsigned delete_pct = 25;
  unsigned read_pct = 50;

  enum class Op : unsigned char { insert, remove, read };

  /// Maps a uniform draw in [0, 100) to an operation.
  [[nodiscard]] constexpr Op pick(unsigned roll) const noexcept {
    if (roll < insert_pct) return Op::insert;
    if (roll < insert_pct + delete_pct) return Op::remove;
    return Op::read;
  }

  /// Parses "<i>i<d>d<r>r", e.g. "10i10d80r".
  static WorkloadProfile parse(const std::string& text) {
    static const std::regex re(R"((\d{1,3})i(\d{1,3})d(\d{1,3})r)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw std::invalid_argument("bad profile '" + text + "', expected e.g. 10i10d80r");
    WorkloadProfile p{static_cast<unsigned>(std::stoul(m[1])), static_cast<unsigned>(std::stoul(m[2])),
                      static_cast<unsigned>(std::stoul(m[3]))};
    if (p.insert_pct + p.delete_pct + p.read_pct != 100)
      throw std::invalid_argument("profile '" + text + "' does not sum to 100");
    return p;
  }

  [[nodiscard]] std::string str() const {
    return std::to_string(insert_pct) + "i" + std::to_string(delete_pct) + "d" + std::to_string(read_pct) + "r";
  }

  friend constexpr bool operator==(const WorkloadProfile&, const WorkloadProfile&) = default;
};

/// Independent per-thread seed derived from a run seed (splitmix64 step).
constexpr std::uint64_t thread_seed(std::uint64_t seed, std::uint64_t thread) noexcept {
  std::uint64_t z = seed + (thread + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace vbr
