#pragma once

#include <cstddef>
#include <functional>

namespace qcfg {

// 0 means std::thread::hardware_concurrency().
int ResolveWorkers(int requested);

// Runs fn(i) for every i in [0, n) on up to `workers` threads. Callers write
// results into per-index slots, so output never depends on scheduling. The
// first exception thrown by any task is rethrown.
void ParallelFor(size_t n, int workers, const std::function<void(size_t)>& fn);

}  // namespace qcfg
