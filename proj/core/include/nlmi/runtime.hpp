#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace nlmi {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel. Training allocates and frees many same-sized buffers per batch; with
/// glibc defaults large ones go through mmap/munmap and page faults dominate.
/// Call once at process start; a no-op on other C libraries.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace nlmi
