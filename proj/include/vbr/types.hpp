#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace vbr {

using epoch_t = std::uint64_t;
using slot_id = std::uint32_t;
using Key = std::int64_t;

/// Retire epoch of a slot that is not currently retired.
inline constexpr epoch_t kNoEpoch = 0;
/// The global epoch starts here, so `retire >= my_e` is false for never-retired slots.
inline constexpr epoch_t kFirstEpoch = 1;

inline constexpr slot_id kNullSlot = std::numeric_limits<slot_id>::max();

/// Reserved for list sentinels; never valid as a user key.
inline constexpr Key kMinKey = std::numeric_limits<Key>::min();
inline constexpr Key kMaxKey = std::numeric_limits<Key>::max();

/// A node as seen by data-structure code: a slot plus the birth epoch that
/// was current when the reference was obtained. A NULL reference has birth 0.
struct NodeRef {
  slot_id slot = kNullSlot;
  epoch_t birth = 0;

  [[nodiscard]] constexpr bool null() const noexcept { return slot == kNullSlot; }
  friend constexpr bool operator==(const NodeRef&, const NodeRef&) = default;
};

inline constexpr NodeRef kNullRef{};

struct Restart {};
inline constexpr Restart restart{};

/// Result of an epoch-checked operation: either a value, or a signal that the
/// caller must roll back to its last checkpoint.
template <class T>
class [[nodiscard]] Outcome {
 public:
  constexpr Outcome(T value) : value_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  constexpr Outcome(Restart) noexcept {}                    // NOLINT(google-explicit-constructor)

  [[nodiscard]] constexpr bool restarted() const noexcept { return !value_.has_value(); }
  constexpr explicit operator bool() const noexcept { return value_.has_value(); }

  constexpr T& operator*() & { return *value_; }
  constexpr const T& operator*() const& { return *value_; }
  constexpr T* operator->() { return &*value_; }
  constexpr const T* operator->() const { return &*value_; }

 private:
  std::optional<T> value_;
};

template <>
class [[nodiscard]] Outcome<void> {
 public:
  constexpr Outcome() noexcept = default;
  constexpr Outcome(Restart) noexcept : ok_(false) {}  // NOLINT(google-explicit-constructor)

  [[nodiscard]] constexpr bool restarted() const noexcept { return !ok_; }
  constexpr explicit operator bool() const noexcept { return ok_; }

 private:
  bool ok_ = true;
};

/// No slot is available in the local list, the retired list, or the global pool.
class PoolExhausted : public std::runtime_error {
 public:
  PoolExhausted() : std::runtime_error("node pool exhausted") {}
};

class ZeroCapacity : public std::invalid_argument {
 public:
  explicit ZeroCapacity(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace vbr
