#pragma once

// Named yield points inside the reclamation primitives. Test builds define
// VBR_TEST_HOOKS and may install a per-thread handler that pauses, reorders
// or perturbs execution at these points. Otherwise every hook is a no-op.

#include <string_view>

namespace vbr::hooks {

enum class Point : unsigned char {
  after_read_link,
  before_cas,
  after_retire,
};

constexpr std::string_view name(Point p) noexcept {
  switch (p) {
    case Point::after_read_link: return "after-read-link";
    case Point::before_cas: return "before-cas";
    case Point::after_retire: return "after-retire";
  }
  return "?";
}

#ifdef VBR_TEST_HOOKS

inline constexpr bool enabled = true;

struct Handler {
  virtual ~Handler() = default;
  virtual void on_hook(Point p) = 0;
};

inline thread_local Handler* tl_handler = nullptr;

inline void fire(Point p) {
  if (Handler* h = tl_handler) h->on_hook(p);
}

/// Installs `h` for the calling thread for the lifetime of the guard.
class ScopedHandler {
 public:
  explicit ScopedHandler(Handler* h) : prev_(tl_handler) { tl_handler = h; }
  ~ScopedHandler() { tl_handler = prev_; }
  ScopedHandler(const ScopedHandler&) = delete;
  ScopedHandler& operator=(const ScopedHandler&) = delete;

 private:
  Handler* prev_;
};

#define VBR_HOOK(point) ::vbr::hooks::fire(point)

#else

inline constexpr bool enabled = false;

#define VBR_HOOK(point) ((void)0)

#endif

}  // namespace vbr::hooks
