#pragma once

#include <array>
#include <cstddef>

namespace mghc {

/// Classical fourth-order Runge-Kutta step of dx/dt = f(t, x) when the first
/// stage slope `k1 = f(t, x)` is already known.
template <class T, std::size_t N, class F>
std::array<T, N> rk4_step(F&& f, T t, const std::array<T, N>& x, T h,
                          const std::array<T, N>& k1) {
  auto axpy = [](const std::array<T, N>& a, T s, const std::array<T, N>& b) {
    std::array<T, N> r;
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  const auto k2 = f(t + h / 2, axpy(x, h / 2, k1));
  const auto k3 = f(t + h / 2, axpy(x, h / 2, k2));
  const auto k4 = f(t + h, axpy(x, h, k3));
  std::array<T, N> out;
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return out;
}

template <class T, std::size_t N, class F>
std::array<T, N> rk4_step(F&& f, T t, const std::array<T, N>& x, T h) {
  return rk4_step(f, t, x, h, f(t, x));
}

}  // namespace mghc
