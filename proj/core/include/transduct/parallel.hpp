#pragma once

#include <cstddef>
#include <functional>

namespace transduct {

/// 0 means "use std::thread::hardware_concurrency()" (at least 1).
std::size_t resolve_threads(std::size_t requested) noexcept;

/// Calls fn(begin, end) for consecutive blocks covering [0, n). Block
/// boundaries depend only on n and block_size, so every block performs the
/// same arithmetic whatever the thread count. The first exception thrown by
/// any block is rethrown on the calling thread.
void parallel_for_blocks(std::size_t n, std::size_t block_size, std::size_t threads,
                         const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace transduct
