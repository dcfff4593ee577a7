#pragma once

#include <cstddef>
#include <functional>

namespace thermomesh {

/// Caps the worker count used by parallel maps; 0 restores the default
/// (hardware concurrency).
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(i) for i in [0, n). Iterations must be independent; each index
/// is executed exactly once. The first exception thrown by any worker is
/// rethrown on the calling thread after all workers finish. Calls made from
/// inside a running map execute serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace thermomesh
