#pragma once

#include <atomic>

#include "vbr/types.hpp"

namespace vbr {

/// Shared monotone epoch counter. Starts at 1; only ever moves by a
/// compare-and-swap from v to v+1.
class alignas(64) GlobalEpoch {
 public:
  GlobalEpoch() = default;
  GlobalEpoch(const GlobalEpoch&) = delete;
  GlobalEpoch& operator=(const GlobalEpoch&) = delete;

  [[nodiscard]] epoch_t read() const noexcept { return value_.load(std::memory_order_seq_cst); }

  /// One attempt, never retried: losing the race means someone else advanced it.
  bool try_advance(epoch_t expected) noexcept {
    return value_.compare_exchange_strong(expected, expected + 1, std::memory_order_seq_cst);
  }

 private:
  std::atomic<epoch_t> value_{kFirstEpoch};
  char pad_[64 - sizeof(std::atomic<epoch_t>)]{};
};

}  // namespace vbr
