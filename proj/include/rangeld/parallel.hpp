#pragma once

// Minimal deterministic work-sharing: indices are partitioned statically, so
// results depend only on the index, never on scheduling.

#include <cstddef>
#include <thread>
#include <vector>

namespace rangeld {

template <class Body>
void parallel_for(std::size_t begin, std::size_t end, int workers, Body&& body) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  if (workers <= 1 || count == 1) {
    for (std::size_t i = begin; i < end; ++i) body(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(workers, count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = begin + w; i < end; i += nw) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rangeld
