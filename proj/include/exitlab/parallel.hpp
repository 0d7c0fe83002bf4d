#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace exitlab::parallel {

// Worker-pool width used by batch simulations. Results are always written
// into slots indexed by path id and reduced in index order, so numeric
// output is identical for any thread count.
inline int& thread_count() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}

inline void set_threads(int n) { thread_count() = n > 0 ? n : 1; }

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const int workers =
      static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(
                                                    std::max(1, thread_count()))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < n;
           i += static_cast<std::size_t>(workers))
        fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace exitlab::parallel
