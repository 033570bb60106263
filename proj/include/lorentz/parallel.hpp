#pragma once

#include <cstddef>
#include <functional>

namespace lorentz {

// Worker count: LORENTZ_THREADS if set and positive, else the hardware concurrency.
int thread_count();
void set_thread_count(int n);  // 0 restores the default

// Runs fn(i) for i in [0, n); each index runs exactly once. The first exception is rethrown.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace lorentz
