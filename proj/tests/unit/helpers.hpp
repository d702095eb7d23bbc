#pragma once

#include <cmath>
#include <cstring>

#include "amwg/model.hpp"

namespace testutil {

// dx = -x per component, no coupling, no noise.
inline amwg::ModelSpec decay_model(int m, int b, double rate = 1.0, double sigma = 0.0) {
  amwg::DriftFn drift = [rate](double, std::span<const double>, std::span<const double> c, std::span<const double>,
                               int, std::span<double> out) {
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = -rate * c[k];
  };
  amwg::DiffusionFn diffusion;
  if (sigma != 0.0) {
    diffusion = [sigma](double, std::span<const double> c, int, std::span<double> out) {
      const std::size_t b = c.size();
      for (std::size_t k = 0; k < b * b; ++k) out[k] = 0.0;
      for (std::size_t k = 0; k < b; ++k) out[k * b + k] = sigma;
    };
  }
  return amwg::ModelSpec(m, b, drift, diffusion);
}

inline bool same_bits(const amwg::Vector& a, const amwg::Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

template <typename A, typename B>
bool same_span(const A& a, const B& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::memcmp(&a[k], &b[k], sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace testutil
