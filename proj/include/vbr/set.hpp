#pragma once

// Umbrella header and the interface shared by the set implementations.

#include <concepts>
#include <string>
#include <vector>

#include "vbr/baselines.hpp"
#include "vbr/hash_table.hpp"
#include "vbr/list.hpp"
#include "vbr/types.hpp"
#include "vbr/vbr.hpp"

namespace vbr {

template <class S>
concept ConcurrentSet = requires(S s, const S cs, typename S::Ctx& ctx, Key k) {
  typename S::domain_type;
  { s.add(ctx, k) } -> std::same_as<bool>;
  { s.remove(ctx, k) } -> std::same_as<bool>;
  { s.contains(ctx, k) } -> std::same_as<bool>;
  { cs.snapshot() } -> std::same_as<std::vector<Key>>;
  { cs.validate() } -> std::same_as<std::string>;
};

static_assert(ConcurrentSet<LockFreeList<VbrDomain>>);
static_assert(ConcurrentSet<HashSet<EbrDomain>>);
static_assert(ConcurrentSet<HashSet<NoReclDomain>>);

}  // namespace vbr
