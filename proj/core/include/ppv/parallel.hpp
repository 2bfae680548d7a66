#ifndef PPV_PARALLEL_HPP
#define PPV_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace ppv {

/// Worker count: min(hardware_concurrency, PPV_THREADS if set).  Always >= 1.
unsigned thread_budget();

/// Run fn(i) for i in [0, n).  Work is split across threads; callers must
/// write results into per-index slots so the output is schedule-independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ppv

#endif  // PPV_PARALLEL_HPP
