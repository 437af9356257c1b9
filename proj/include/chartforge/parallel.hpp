// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace chartforge {

/// Worker count: hardware concurrency capped by CHARTFORGE_THREADS.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Iterations must write disjoint data; the
/// result is then independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace chartforge
