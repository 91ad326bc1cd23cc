// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "hennion/core.hpp"

namespace hennion {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_key(std::uint64_t key, std::uint64_t salt) {
  return splitmix64(key ^ splitmix64(salt ^ 0x6a09e667f3bcc909ULL));
}

/// Random stream identified by a 64-bit key. Children are derived from
/// (key, name) or (key, index) only, so adding a consumer never shifts
/// the draws of another.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : key_(key), engine_(splitmix64(key)) {}

  Stream substream(std::string_view name) const { return Stream(derive_key(key_, fnv1a(name))); }
  Stream substream(std::uint64_t index) const { return Stream(derive_key(key_, splitmix64(index) + 1)); }

  std::uint64_t key() const { return key_; }

  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double gaussian() { return normal_(engine_); }
  cplx complex_gaussian() {
    double re = gaussian();
    double im = gaussian();
    return {re, im};
  }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(engine_); }

  Mat gaussian_matrix(int rows, int cols) {
    Mat g(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) g(i, j) = complex_gaussian();
    return g;
  }
  Vec gaussian_vector(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = complex_gaussian();
    return v;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hennion
