#pragma once

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace amwg {

// Runs fn(i) for i in [0, count), in parallel when OpenMP is available.
// The first exception thrown by any iteration is rethrown on the caller.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  std::exception_ptr error;
  std::mutex guard;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (count > 1)
#endif
  for (int i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

inline void set_thread_count(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

}  // namespace amwg
