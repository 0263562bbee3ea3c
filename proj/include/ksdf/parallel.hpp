#pragma once

#include <cstddef>
#include <functional>

namespace ksdf {

/// Worker cap used by all parallel loops. 0 means "auto" (hardware concurrency).
/// The initial value comes from KSDF_THREADS.
void set_thread_count(int n);
int thread_count();

/// Runs body(chunk_index) for chunk_index in [0, chunks) across workers.
///
/// Work is split into chunks by the caller, never by worker count, so any
/// per-chunk result (and any reduction performed in chunk order afterwards)
/// is identical for every thread count.
void parallel_for_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body);

/// Number of fixed-size chunks covering n items.
constexpr std::size_t chunk_count(std::size_t n, std::size_t chunk) {
  return (n + chunk - 1) / chunk;
}

}  // namespace ksdf
