#include "mvr/parallel.hpp"

#include <atomic>

namespace mvr {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() {
  if (g_max_threads > 0) return g_max_threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::size_t n, std::size_t n_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  n_chunks = std::max<std::size_t>(1, std::min(n_chunks, n));
  const std::size_t chunk = (n + n_chunks - 1) / n_chunks;
  const int workers = std::min<int>(max_threads(), static_cast<int>(n_chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t b = c * chunk;
      if (b >= n) break;
      fn(c, b, std::min(n, b + chunk));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      const std::size_t b = c * chunk;
      if (b >= n) return;
      fn(c, b, std::min(n, b + chunk));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_chunks(n, 4 * static_cast<std::size_t>(max_threads()),
                  [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) fn(i);
                  });
}

}  // namespace mvr
