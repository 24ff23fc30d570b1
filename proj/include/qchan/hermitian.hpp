#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <lapacke.h>

namespace qchan {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline double frobenius_norm(const Matrix& H) { return H.norm(); }

inline bool is_hermitian(const Matrix& H, double tol) {
  if (H.rows() != H.cols()) return false;
  return (H - H.adjoint()).norm() <= tol;
}

// Accepts a matrix that is Hermitian up to tol * ||H||_F and returns the
// symmetrized (H + H*)/2; larger violations are rejected.
inline Matrix import_hermitian(const Matrix& H, double tol = 1e-12) {
  if (H.rows() != H.cols())
    throw std::invalid_argument("import_hermitian: matrix is not square");
  const double scale = H.norm();
  const double viol = (H - H.adjoint()).norm();
  if (viol > tol * std::max(scale, 1.0))
    throw std::invalid_argument("import_hermitian: symmetry violation " +
                                std::to_string(viol) + " exceeds tolerance");
  return 0.5 * (H + H.adjoint());
}

// Fixed coordinate order of the real vectorization:
//   [ H(0,0).re, ..., H(d-1,d-1).re,
//     sqrt(2)*Re H(i,j) for i<j row-major,
//     sqrt(2)*Im H(i,j) for i<j row-major ]
// This makes svec a linear isometry: ||svec(H)||_2 = ||H||_F.
inline RealVector svec(const Matrix& H) {
  const Eigen::Index d = H.rows();
  if (H.cols() != d) throw std::invalid_argument("svec: matrix is not square");
  static const double rt2 = std::sqrt(2.0);
  RealVector v(d * d);
  const Eigen::Index noff = d * (d - 1) / 2;
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < d; ++i) v(i) = H(i, i).real();
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j, ++p) {
      v(d + p) = rt2 * H(i, j).real();
      v(d + noff + p) = rt2 * H(i, j).imag();
    }
  return v;
}

inline Matrix smat(const RealVector& v) {
  const auto len = v.size();
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(double(len))));
  if (d * d != len)
    throw std::invalid_argument("smat: length is not a perfect square");
  static const double irt2 = 1.0 / std::sqrt(2.0);
  Matrix H(d, d);
  const Eigen::Index noff = d * (d - 1) / 2;
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < d; ++i) H(i, i) = Complex(v(i), 0.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j, ++p) {
      const Complex z(irt2 * v(d + p), irt2 * v(d + noff + p));
      H(i, j) = z;
      H(j, i) = std::conj(z);
    }
  return H;
}

// Eigenvalues sorted descending, eigenvector columns aligned.
struct SpectralDecomposition {
  RealVector eigenvalues;
  Matrix eigenvectors;
};

inline SpectralDecomposition eigh(const Matrix& H) {
  const auto d = H.rows();
  if (H.cols() != d) throw std::invalid_argument("eigh: matrix is not square");
  SpectralDecomposition out;
  out.eigenvectors = H;
  RealVector w(d);
  if (d > 0) {
    const int info = LAPACKE_zheevd(
        LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(d),
        reinterpret_cast<lapack_complex_double*>(out.eigenvectors.data()),
        static_cast<lapack_int>(d), w.data());
    if (info != 0)
      throw std::runtime_error("eigh: zheevd failed with info=" +
                               std::to_string(info));
  }
  // LAPACK returns ascending order.
  out.eigenvalues = w.reverse();
  out.eigenvectors = out.eigenvectors.rowwise().reverse().eval();
  return out;
}

// Sum of lambda_j x_j x_j* over positive eigenvalues, restricted to the
// max_terms largest when max_terms >= 0.
inline Matrix positive_part(const SpectralDecomposition& es,
                            Eigen::Index max_terms = -1) {
  const auto d = es.eigenvalues.size();
  Eigen::Index keep = 0;
  const Eigen::Index cap = (max_terms < 0) ? d : std::min(max_terms, d);
  while (keep < cap && es.eigenvalues(keep) > 0.0) ++keep;
  if (keep == 0) return Matrix::Zero(d, d);
  const auto U = es.eigenvectors.leftCols(keep);
  return U * es.eigenvalues.head(keep).asDiagonal() * U.adjoint();
}

// Frobenius-nearest PSD matrix (Eckart-Young).
inline Matrix project_psd(const Matrix& H) { return positive_part(eigh(H)); }

// Nonconvex projection: keep only the r largest eigenvalues, and among those
// only the positive ones.
inline Matrix project_psd_rank(const Matrix& H, Eigen::Index r) {
  if (r < 1 || r > H.rows())
    throw std::invalid_argument("project_psd_rank: rank bound out of range");
  return positive_part(eigh(H), r);
}

inline Matrix reflect_through(const Matrix& x, const Matrix& proj_x) {
  if (x.rows() != proj_x.rows() || x.cols() != proj_x.cols())
    throw std::invalid_argument("reflect_through: dimension mismatch");
  return 2.0 * proj_x - x;
}

// Count of |eigenvalues| above dim * ulp(max |eigenvalue|).
inline Eigen::Index numerical_rank(const SpectralDecomposition& es) {
  const auto d = es.eigenvalues.size();
  if (d == 0) return 0;
  const double smax = es.eigenvalues.cwiseAbs().maxCoeff();
  if (smax == 0.0) return 0;
  const double th =
      double(d) * (std::nextafter(smax, std::numeric_limits<double>::infinity()) - smax);
  Eigen::Index count = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    if (std::abs(es.eigenvalues(j)) > th) ++count;
  return count;
}

inline Eigen::Index numerical_rank(const Matrix& H) {
  return numerical_rank(eigh(H));
}

}  // namespace qchan
