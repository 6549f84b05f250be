#pragma once

#include <cstddef>

namespace mdgp::testing {

/// Heap accounting through interposed malloc/calloc/realloc/free. Linking
/// alloc_tracker.cpp into an executable replaces the allocator entry points
/// for the whole process.
struct AllocStats {
  std::size_t largest = 0;     // largest single request while active
  std::size_t peak_live = 0;   // peak live bytes above the start level
  std::size_t allocations = 0;
};

/// Records allocations made during its lifetime (any thread).
class AllocScope {
 public:
  AllocScope();
  ~AllocScope();
  AllocScope(const AllocScope &) = delete;
  AllocScope &operator=(const AllocScope &) = delete;

  AllocStats stats() const;
};

}  // namespace mdgp::testing
