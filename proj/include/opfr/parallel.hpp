#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace opfr {

/// Runs body(i) for i in [0, n) on up to `threads` workers using contiguous
/// static chunks. Each index is processed exactly once, so results written per
/// index do not depend on scheduling. The first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        const std::size_t end = std::min(n, (t + 1) * chunk);
        for (std::size_t i = t * chunk; i < end; ++i) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Thread budget from the OPFR_THREADS environment variable, or `fallback`.
inline std::size_t threads_from_env(std::size_t fallback = 1) {
  const char* v = std::getenv("OPFR_THREADS");
  if (!v || !*v) return fallback;
  try {
    const long parsed = std::stol(v);
    return parsed > 0 ? static_cast<std::size_t>(parsed) : fallback;
  } catch (...) {
    return fallback;
  }
}

}  // namespace opfr
