#pragma once

#include <functional>

namespace domdepth {

/// Worker count: min(hardware_concurrency, DOMD_BENCH_THREADS if set). At least 1.
int worker_count();

/// Runs fn(i) for i in [0, n). Rows are split into contiguous chunks, one chunk
/// per worker; every index is processed exactly once, so any kernel that writes
/// only to its own row is bitwise independent of the worker count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace domdepth
