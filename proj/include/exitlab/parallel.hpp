// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace exitlab {

/// Worker count: hardware concurrency, capped by EXITLAB_THREADS when set.
unsigned worker_count();

/*!
 * Run body(i) for i in [0, n) on up to worker_count() threads.
 *
 * Work is handed out in contiguous chunks; results must be written to
 * per-index slots so aggregation order never depends on scheduling. The
 * first exception thrown by any worker is rethrown on the calling thread.
 */
void parallel_for(std::size_t n, std::function<void(std::size_t)> const& body);

}  // namespace exitlab
