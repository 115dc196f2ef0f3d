#pragma once

#include <cstddef>
#include <functional>

namespace glamor {

/// Upper bound on worker threads used by parallel_for. Defaults to 1.
void set_max_threads(std::size_t threads) noexcept;
std::size_t max_threads() noexcept;

/// Runs body(i) for i in [0, count). Indices are split into contiguous
/// chunks; callers must make each body(i) independent of the others so the
/// result does not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace glamor
