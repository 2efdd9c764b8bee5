#pragma once

// A reclamation domain together with one set built on it, sized for a key
// range. VBR instances can carry an invariant monitor that is attached
// before the first node is created.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "vbr/set.hpp"

namespace vbr {

template <class Set>
struct SetTraits;

template <class D>
struct SetTraits<LockFreeList<D>> {
  static constexpr const char* name = "list";
  static std::size_t reserved(std::size_t /*key_range*/) { return LockFreeList<D>::reserved_slots(); }
  static LockFreeList<D> make(D& d, std::size_t /*key_range*/) { return LockFreeList<D>(d); }
};

template <class D>
struct SetTraits<HashSet<D>> {
  static constexpr const char* name = "hash";
  static std::size_t reserved(std::size_t key_range) {
    return HashSet<D>::reserved_slots(HashSet<D>::buckets_for_range(key_range));
  }
  static HashSet<D> make(D& d, std::size_t key_range) {
    return HashSet<D>(d, HashSet<D>::buckets_for_range(key_range));
  }
};

template <class Set>
class Instance {
 public:
  using Domain = typename Set::domain_type;
  using Ctx = typename Domain::context_type;

  Instance(std::size_t threads, const PoolConfig& config, std::size_t key_range, bool with_monitor = false,
           std::size_t overflow = 0)
      : domain_(threads, config, SetTraits<Set>::reserved(key_range), overflow),
        monitor_(attach(domain_, with_monitor)),
        set_(SetTraits<Set>::make(domain_, key_range)) {}

  [[nodiscard]] Domain& domain() noexcept { return domain_; }
  [[nodiscard]] const Domain& domain() const noexcept { return domain_; }
  [[nodiscard]] Set& set() noexcept { return set_; }
  [[nodiscard]] const Set& set() const noexcept { return set_; }
  [[nodiscard]] Ctx& context(std::size_t t) { return domain_.context(t); }
  /// Null unless requested and the domain is versioned.
  [[nodiscard]] InvariantMonitor* monitor() const noexcept { return monitor_.get(); }

  /// Slots that are neither pooled, reachable, nor sentinels. Quiescent only.
  /// Also reports slots seen in two places via `duplicates`.
  std::size_t unaccounted_slots(std::size_t* duplicates = nullptr) const {
    const Arena& a = domain_.arena();
    std::vector<unsigned char> seen(a.capacity(), 0);
    std::size_t dup = 0;
    auto visit = [&](slot_id s) {
      if (seen[s]) ++dup;
      seen[s] = 1;
    };
    for (std::size_t s = 0; s < a.reserved_used(); ++s) visit(static_cast<slot_id>(s));
    domain_.for_each_pooled_slot(visit);
    set_.for_each_reachable(visit);
    for (std::size_t s = a.overflow_claimed_end(); s < a.capacity(); ++s) visit(static_cast<slot_id>(s));
    if (duplicates) *duplicates = dup;
    std::size_t missing = 0;
    for (std::size_t s = a.reserved(); s < a.capacity(); ++s) missing += seen[s] == 0;
    return missing;
  }

 private:
  static std::unique_ptr<InvariantMonitor> attach(Domain& d, bool want) {
    if constexpr (Domain::versioned) {
      if (want) {
        auto m = std::make_unique<InvariantMonitor>(d.arena().capacity());
        d.set_monitor(m.get());
        return m;
      }
    }
    return nullptr;
  }

  Domain domain_;
  std::unique_ptr<InvariantMonitor> monitor_;
  Set set_;
};

}  // namespace vbr
