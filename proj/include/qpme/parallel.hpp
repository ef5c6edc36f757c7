#pragma once

#include <cstddef>

namespace qpme {

/// Samples per work chunk. Chunks are the unit of parallel work and partial
/// sums are added in chunk order, so results do not depend on thread count.
inline constexpr std::size_t kChunk = 64;

/// Worker count from QPME_THREADS (unset or 0 means the OpenMP default).
int worker_threads();

/// Applies worker_threads() to the OpenMP runtime.
void configure_threads();

}  // namespace qpme
