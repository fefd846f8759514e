#pragma once

#include <functional>

namespace ffgt {

// Runs fn(0..n-1) on `jobs` threads (0 = hardware concurrency). Work items
// must be independent; exceptions are rethrown on the calling thread after
// all workers join.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

int resolve_jobs(int jobs);

}  // namespace ffgt
