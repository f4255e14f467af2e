#pragma once

#include <cstddef>
#include <vector>

#include <functional>

namespace asiplab {

/// Caps the number of worker threads used by parallel_for. 0 means
/// hardware concurrency.
void set_thread_cap(int threads);
int thread_cap();

/// Runs body(i) for i in [0, count). Work distribution is dynamic, so
/// callers must write results by index and reduce afterwards in index
/// order; that keeps every reduction independent of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  parallel_for(count, [&](std::size_t i) { out[i] = f(i); });
  return out;
}

}  // namespace asiplab
