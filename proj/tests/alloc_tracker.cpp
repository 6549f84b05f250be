#include "alloc_tracker.hpp"

#include <malloc.h>

#include <algorithm>
#include <atomic>

extern "C" {
void *__libc_malloc(std::size_t);
void *__libc_calloc(std::size_t, std::size_t);
void *__libc_realloc(void *, std::size_t);
void __libc_free(void *);
void *__libc_memalign(std::size_t, std::size_t);
}

namespace {

std::atomic<bool> g_active{false};
std::atomic<long long> g_live{0};
std::atomic<long long> g_peak{0};
std::atomic<std::size_t> g_largest{0};
std::atomic<std::size_t> g_count{0};

void note_alloc(void *p, std::size_t request) {
  if (!p || !g_active.load(std::memory_order_relaxed)) return;
  const auto usable = static_cast<long long>(malloc_usable_size(p));
  const long long live = g_live.fetch_add(usable) + usable;
  long long peak = g_peak.load();
  while (live > peak && !g_peak.compare_exchange_weak(peak, live)) {
  }
  std::size_t largest = g_largest.load();
  while (request > largest && !g_largest.compare_exchange_weak(largest, request)) {
  }
  g_count.fetch_add(1);
}

void note_free(void *p) {
  if (!p || !g_active.load(std::memory_order_relaxed)) return;
  g_live.fetch_sub(static_cast<long long>(malloc_usable_size(p)));
}

}  // namespace

extern "C" {

void *malloc(std::size_t n) {
  void *p = __libc_malloc(n);
  note_alloc(p, n);
  return p;
}

void *calloc(std::size_t count, std::size_t n) {
  void *p = __libc_calloc(count, n);
  note_alloc(p, count * n);
  return p;
}

void *realloc(void *old, std::size_t n) {
  note_free(old);
  void *p = __libc_realloc(old, n);
  note_alloc(p, n);
  return p;
}

void *aligned_alloc(std::size_t alignment, std::size_t n) {
  void *p = __libc_memalign(alignment, n);
  note_alloc(p, n);
  return p;
}

void *memalign(std::size_t alignment, std::size_t n) {
  return aligned_alloc(alignment, n);
}

int posix_memalign(void **out, std::size_t alignment, std::size_t n) {
  void *p = aligned_alloc(alignment, n);
  if (!p) return 12;
  *out = p;
  return 0;
}

void free(void *p) {
  note_free(p);
  __libc_free(p);
}

}  // extern "C"

namespace mdgp::testing {

AllocScope::AllocScope() {
  g_live = 0;
  g_peak = 0;
  g_largest = 0;
  g_count = 0;
  g_active = true;
}

AllocScope::~AllocScope() { g_active = false; }

AllocStats AllocScope::stats() const {
  AllocStats s;
  s.largest = g_largest.load();
  s.peak_live = static_cast<std::size_t>(std::max(0LL, g_peak.load()));
  s.allocations = g_count.load();
  return s;
}

}  // namespace mdgp::testing
