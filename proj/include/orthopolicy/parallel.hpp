#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace orthopolicy {

/// Caps the number of worker threads used by parallel_for (0 = hardware concurrency).
void set_thread_limit(unsigned threads);
unsigned thread_limit();

/// Runs fn(i) for i in [0, count). Work items must write to disjoint outputs;
/// reductions are done by the caller in index order so results do not depend
/// on the number of workers. The first exception thrown by any item is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

/// Pairwise (cascade) summation in index order.
double pairwise_sum(std::span<const double> values);

}  // namespace orthopolicy
