#pragma once

#include <cstddef>
#include <functional>

namespace rawforge {

/// Worker count used by parallel_for. 0 restores the default: RAWFORGE_THREADS
/// if set, otherwise hardware concurrency.
void set_thread_count(int n);
int thread_count();

/// Calls body(begin, end) over disjoint contiguous chunks covering [0, n).
/// Bodies must write only to their own indices; results do not depend on
/// the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rawforge
