// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <string>

namespace motif::test {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Independent cumulative product for a linear beta schedule, t in [1, T].
inline double alpha_bar(int T, double b1, double bT, int t) {
  long double prod = 1.0L;
  for (int s = 1; s <= t; ++s) {
    const long double beta = T == 1 ? b1 : b1 + (bT - b1) * static_cast<long double>(s - 1) / (T - 1);
    prod *= 1.0L - beta;
  }
  return static_cast<double>(prod);
}

// The heatmap sigmoid written out from its definition.
inline double sigma(double x, double k = 100.0, double tau = 0.05) {
  return 1.0 / (1.0 + std::exp(k * (tau - x)));
}

}  // namespace motif::test
