#include "transduct/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace transduct {

std::size_t resolve_threads(std::size_t requested) noexcept {
  if (requested != 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for_blocks(std::size_t n, std::size_t block_size, std::size_t threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  block_size = std::max<std::size_t>(1, block_size);
  const std::size_t blocks = (n + block_size - 1) / block_size;
  const std::size_t workers = std::min(resolve_threads(threads), blocks);

  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) {
      fn(b * block_size, std::min(n, (b + 1) * block_size));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        fn(b * block_size, std::min(n, (b + 1) * block_size));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace transduct
