#pragma once

#include <cstddef>
#include <functional>

namespace rrecon {

// Worker cap: REGIME_RECON_THREADS env var, else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Items are distributed in fixed contiguous
// chunks so results never depend on the worker count; fn must only write
// to per-item state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace rrecon
