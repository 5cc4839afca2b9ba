#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace restyle {

/// Worker count to use: `requested` when positive, else the OpenMP default.
inline int resolve_workers(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

/// Runs body(i) for i in [0, n) on an OpenMP team. Items are independent
/// and write only their own output slot; the first exception by index is
/// rethrown after the loop.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace restyle
