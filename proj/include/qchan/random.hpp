#pragma once

#include <random>

#include "qchan/hermitian.hpp"

namespace qchan {

using Rng = std::mt19937_64;

// Mirrors a fixed "default settings" reproducibility convention.
inline constexpr std::uint64_t kDefaultSeed = 0;

inline Matrix random_ginibre(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix G(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      G(i, j) = Complex(re, im);
    }
  return G;
}

// Haar unitary: Ginibre + QR with the phases of R's diagonal absorbed into Q.
inline Matrix random_unitary(int n, Rng& rng) {
  const Matrix G = random_ginibre(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    const Complex r = R(j, j);
    const Complex phase = (std::abs(r) > 0.0) ? r / std::abs(r) : Complex(1, 0);
    Q.col(j) *= phase;
  }
  return Q;
}

// Normalized Wishart: G G* / tr(G G*), PSD with unit trace.
inline Matrix random_density(int n, Rng& rng) {
  const Matrix G = random_ginibre(n, n, rng);
  Matrix A = G * G.adjoint();
  A /= A.trace().real();
  return A;
}

// Uniform point of the open simplex via normalized exponentials.
inline RealVector random_simplex(int r, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  RealVector d(r);
  for (int i = 0; i < r; ++i) {
    double x;
    do {
      x = expo(rng);
    } while (x <= 0.0);
    d(i) = x;
  }
  d /= d.sum();
  return d;
}

}  // namespace qchan
