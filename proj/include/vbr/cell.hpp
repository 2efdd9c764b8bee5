#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <type_traits>

#include "vbr/types.hpp"

namespace vbr {

/// Packed link word: (slot + 1) << 1 | mark. Zero is an unmarked NULL link.
struct LinkWord {
  static constexpr std::uint64_t kMarkBit = 1;

  static constexpr std::uint64_t pack(slot_id s, bool marked = false) noexcept {
    if (s == kNullSlot) return marked ? kMarkBit : 0;
    return ((static_cast<std::uint64_t>(s) + 1) << 1) | (marked ? kMarkBit : 0);
  }
  static constexpr slot_id target(std::uint64_t w) noexcept {
    const std::uint64_t idx = w >> 1;
    return idx == 0 ? kNullSlot : static_cast<slot_id>(idx - 1);
  }
  static constexpr bool marked(std::uint64_t w) noexcept { return (w & kMarkBit) != 0; }
  static constexpr std::uint64_t unmarked(std::uint64_t w) noexcept { return w & ~kMarkBit; }
};

/// One half of a versioned link as stored in memory.
struct LinkValue {
  std::uint64_t word = 0;
  epoch_t version = 0;
  friend constexpr bool operator==(const LinkValue&, const LinkValue&) = default;
};

/// A reusable, type-preserving node slot. All fields are plain integers so
/// that zero-filled memory is a valid (free, never-used) cell; concurrent
/// access goes through the atomic helpers below.
///
/// `link_word` and `link_version` are adjacent and 16-byte aligned; they are
/// only ever written together by a double-width compare-exchange.
struct alignas(64) Cell {
  alignas(16) std::uint64_t link_word;
  epoch_t link_version;
  epoch_t birth;
  epoch_t retire;
  Key key;
  // Pool bookkeeping, owned by whoever holds the slot in a pool.
  std::uint32_t pool_next;    // slot + 1, 0 terminates
  std::uint32_t batch_next;   // global pool: next batch head, slot + 1
  std::uint32_t batch_count;  // global pool: slots in this batch
};

static_assert(sizeof(Cell) == 64);
static_assert(std::is_trivially_default_constructible_v<Cell>);
static_assert(std::endian::native == std::endian::little,
              "link packing assumes the word precedes the version in a 128-bit load");

namespace cell_ops {

template <class T>
inline T load(const T& field, std::memory_order mo = std::memory_order_acquire) noexcept {
  return std::atomic_ref<T>(const_cast<T&>(field)).load(mo);
}

template <class T>
inline void store(T& field, T v, std::memory_order mo = std::memory_order_release) noexcept {
  std::atomic_ref<T>(field).store(v, mo);
}

template <class T>
inline bool cas(T& field, T& expected, T desired) noexcept {
  return std::atomic_ref<T>(field).compare_exchange_strong(expected, desired,
                                                           std::memory_order_seq_cst);
}

using u128 = unsigned __int128 __attribute__((may_alias));

inline constexpr u128 to_u128(LinkValue v) noexcept {
  return (static_cast<u128>(v.version) << 64) | static_cast<u128>(v.word);
}

/// Double-width compare-exchange of (word, version). Full fence.
inline bool wcas(Cell& c, LinkValue expected, LinkValue desired) noexcept {
  auto* p = reinterpret_cast<u128*>(&c.link_word);
  return __sync_bool_compare_and_swap(p, to_u128(expected), to_u128(desired));
}

/// Reads both halves. Not a single atomic snapshot: callers use it only on
/// cells they own or whose link is known to be immutable.
inline LinkValue read_link(const Cell& c) noexcept {
  return LinkValue{load(c.link_word), load(c.link_version)};
}

}  // namespace cell_ops
}  // namespace vbr
