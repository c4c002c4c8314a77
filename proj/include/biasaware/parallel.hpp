#pragma once

#include <cstddef>
#include <functional>

namespace biasaware {

/// Worker count: BIASAWARE_THREADS if set and positive, else the hardware concurrency.
unsigned thread_count();

/// Calls body(i) for i in [0, count) on up to thread_count() threads.
/// Results must be written to per-index slots so the outcome does not depend
/// on scheduling. An exception from any task is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace biasaware
