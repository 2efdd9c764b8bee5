#pragma once

// Fixed-size hash set: an array of LockFreeList buckets that share one tail
// sentinel. The bucket count is a power of two and never changes.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbr/list.hpp"
#include "vbr/types.hpp"

namespace vbr {

template <class Domain>
class HashSet {
 public:
  using domain_type = Domain;
  using Ctx = typename Domain::context_type;
  using Bucket = LockFreeList<Domain>;

  /// Bucket count sized for a load factor of about one once half of
  /// `key_range` is present.
  static std::size_t buckets_for_range(std::size_t key_range) noexcept {
    return std::bit_ceil(std::max<std::size_t>(1, key_range / 2));
  }

  /// Sentinel slots needed: one head per bucket plus the shared tail.
  static constexpr std::size_t reserved_slots(std::size_t buckets) noexcept { return buckets + 1; }

  HashSet(Domain& domain, std::size_t buckets) : dom_(&domain) {
    if (buckets == 0 || !std::has_single_bit(buckets))
      throw std::invalid_argument("bucket count must be a power of two");
    mask_ = buckets - 1;
    const NodeRef tail = domain.make_sentinel(kMaxKey);
    buckets_.reserve(buckets);
    for (std::size_t i = 0; i < buckets; ++i) buckets_.emplace_back(domain, tail);
  }

  [[nodiscard]] std::size_t bucket_count() const noexcept { return buckets_.size(); }
  [[nodiscard]] std::size_t bucket_of(Key key) const noexcept {
    return static_cast<std::size_t>(static_cast<std::uint64_t>(key) * 0x9E3779B97F4A7C15ull) & mask_;
  }
  [[nodiscard]] Domain& domain() const noexcept { return *dom_; }

  bool add(Ctx& ctx, Key key) { return buckets_[bucket_of(key)].add(ctx, key); }
  bool remove(Ctx& ctx, Key key) { return buckets_[bucket_of(key)].remove(ctx, key); }
  bool contains(Ctx& ctx, Key key) { return buckets_[bucket_of(key)].contains(ctx, key); }

  // ---- quiescent inspection ----------------------------------------------

  [[nodiscard]] std::vector<Key> snapshot() const {
    std::vector<Key> keys;
    for (const auto& b : buckets_) {
      auto part = b.snapshot();
      keys.insert(keys.end(), part.begin(), part.end());
    }
    return keys;
  }

  [[nodiscard]] std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
  }

  template <class F>
  void for_each_reachable(F&& f) const {
    for (const auto& b : buckets_) b.for_each_reachable(f);
  }

  [[nodiscard]] std::string validate() const {
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
      if (auto err = buckets_[i].validate(); !err.empty()) return "bucket " + std::to_string(i) + ": " + err;
      std::string misplaced;
      buckets_[i].for_each_reachable([&](slot_id s) {
        if (misplaced.empty() && bucket_of(dom_->raw(s).key) != i)
          misplaced = "bucket " + std::to_string(i) + ": key in wrong bucket";
      });
      if (!misplaced.empty()) return misplaced;
    }
    return {};
  }

  [[nodiscard]] std::size_t version_mismatches() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.version_mismatches();
    return n;
  }

 private:
  Domain* dom_;
  std::size_t mask_ = 0;
  std::vector<Bucket> buckets_;
};

}  // namespace vbr
