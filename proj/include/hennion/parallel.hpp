// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hennion/core.hpp"

namespace hennion {

/// Worker count from HENNION_LAB_THREADS, else the hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("HENNION_LAB_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw input_error(std::string("HENNION_LAB_THREADS must be a positive integer, got ") + env);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Evaluates fn(0..n-1) on a pool of workers and returns the results in
/// index order. The first exception (lowest index) is rethrown.
template <class T>
std::vector<T> parallel_map(int n, const std::function<T(int)>& fn, int workers = 0) {
  if (workers <= 0) workers = worker_count();
  workers = std::max(1, std::min(workers, n));
  std::vector<T> out(static_cast<std::size_t>(std::max(n, 0)));
  std::vector<std::exception_ptr> errors(out.size());
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace hennion
