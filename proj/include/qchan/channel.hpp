#pragma once

#include <optional>
#include <vector>

#include "qchan/hermitian.hpp"

namespace qchan {

// PSD Hermitian matrix with unit trace. Stored as a plain matrix; validation
// is explicit.
inline void validate_density(const Matrix& X, double tol = 1e-12) {
  const Matrix H = import_hermitian(X, tol);
  const double scale = std::max(H.norm(), 1.0);
  if (std::abs(H.trace().real() - 1.0) > tol * scale ||
      std::abs(H.trace().imag()) > tol * scale)
    throw std::invalid_argument("validate_density: trace is not 1");
  const auto es = eigh(H);
  if (es.eigenvalues(es.eigenvalues.size() - 1) < -tol * scale)
    throw std::invalid_argument("validate_density: matrix is not PSD");
}

// nm x nm Hermitian block matrix, blocks P_ij of size m x m indexed by the
// input-space positions i,j in [0, n).
struct ChoiMatrix {
  int n = 0;  // input dimension
  int m = 0;  // output dimension
  Matrix P;

  ChoiMatrix() = default;
  ChoiMatrix(int n_, int m_, Matrix P_) : n(n_), m(m_), P(std::move(P_)) {
    if (P.rows() != Eigen::Index(n) * m || P.cols() != Eigen::Index(n) * m)
      throw std::invalid_argument("ChoiMatrix: size mismatch");
  }

  Eigen::Index side() const { return Eigen::Index(n) * m; }

  auto block(int i, int j) const { return P.block(Eigen::Index(i) * m, Eigen::Index(j) * m, m, m); }
};

// Kraus operators K_j of shape m x n acting as T(X) = sum_j K_j X K_j*.
struct KrausSet {
  std::vector<Matrix> ops;

  int input_dim() const { return ops.empty() ? 0 : int(ops.front().cols()); }
  int output_dim() const { return ops.empty() ? 0 : int(ops.front().rows()); }

  // sum_j K_j* K_j, equal to I_n for a trace-preserving channel.
  Matrix completeness() const {
    Matrix S = Matrix::Zero(input_dim(), input_dim());
    for (const auto& K : ops) S += K.adjoint() * K;
    return S;
  }
};

// T(X) = sum_ij X_ij P_ij.
inline Matrix apply_channel(const ChoiMatrix& C, const Matrix& X) {
  if (X.rows() != C.n || X.cols() != C.n)
    throw std::invalid_argument("apply_channel: input dimension mismatch");
  Matrix Y = Matrix::Zero(C.m, C.m);
  for (int i = 0; i < C.n; ++i)
    for (int j = 0; j < C.n; ++j) Y += X(i, j) * C.block(i, j);
  return Y;
}

// Vectorization of an m x n Kraus operator chosen so that block (p,q) of
// v v* equals K E_pq K*.
inline Eigen::VectorXcd kraus_vectorize(const Matrix& K) {
  const auto m = K.rows(), n = K.cols();
  Eigen::VectorXcd v(n * m);
  for (Eigen::Index p = 0; p < n; ++p)
    for (Eigen::Index s = 0; s < m; ++s) v(p * m + s) = K(s, p);
  return v;
}

inline Matrix kraus_devectorize(const Eigen::VectorXcd& v, int n, int m) {
  Matrix K(m, n);
  for (int p = 0; p < n; ++p)
    for (int s = 0; s < m; ++s) K(s, p) = v(Eigen::Index(p) * m + s);
  return K;
}

// P = sum_i d_i v_i v_i* with v_i the vectorization of K_i; weights default
// to 1.
inline ChoiMatrix choi_from_kraus(const KrausSet& K,
                                  const RealVector& weights = RealVector()) {
  if (K.ops.empty()) throw std::invalid_argument("choi_from_kraus: empty Kraus set");
  const int n = K.input_dim(), m = K.output_dim();
  if (weights.size() != 0 && weights.size() != Eigen::Index(K.ops.size()))
    throw std::invalid_argument("choi_from_kraus: weight count mismatch");
  Matrix P = Matrix::Zero(Eigen::Index(n) * m, Eigen::Index(n) * m);
  for (size_t i = 0; i < K.ops.size(); ++i) {
    if (K.ops[i].rows() != m || K.ops[i].cols() != n)
      throw std::invalid_argument("choi_from_kraus: Kraus dimension mismatch");
    const double d = weights.size() ? weights(Eigen::Index(i)) : 1.0;
    if (d <= 0.0) throw std::invalid_argument("choi_from_kraus: nonpositive weight");
    const auto v = kraus_vectorize(K.ops[i]);
    P.noalias() += d * (v * v.adjoint());
  }
  // Fused multiply-adds leave the accumulated outer products Hermitian only
  // to rounding; symmetrize so stored matrices survive an exact round trip.
  P = 0.5 * (P + P.adjoint()).eval();
  return ChoiMatrix(n, m, std::move(P));
}

// Eigendecomposes P and de-vectorizes sqrt(lambda_j) x_j for eigenvalues
// above the numerical-rank threshold, so the Kraus count equals
// numerical_rank(P).
inline KrausSet kraus_from_choi(const ChoiMatrix& C, double psd_tol = 1e-10) {
  const auto es = eigh(C.P);
  const auto d = es.eigenvalues.size();
  const double scale = C.P.norm();
  if (d > 0 && es.eigenvalues(d - 1) < -psd_tol * std::max(scale, 1.0))
    throw std::invalid_argument("kraus_from_choi: matrix is not PSD");
  const double smax = d ? es.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double th =
      double(d) * (std::nextafter(smax, std::numeric_limits<double>::infinity()) - smax);
  KrausSet K;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (es.eigenvalues(j) <= th) break;
    const Eigen::VectorXcd v = std::sqrt(es.eigenvalues(j)) * es.eigenvectors.col(j);
    K.ops.push_back(kraus_devectorize(v, C.n, C.m));
  }
  return K;
}

struct TpReport {
  double max_trace_violation = 0;  // max |tr(P_ij) - delta_ij| over i <= j
  double min_eigenvalue = 0;
  std::optional<double> unital_violation;  // ||T(I_n) - I_m||_F when requested
};

inline TpReport validate_tp_choi(const ChoiMatrix& C, bool check_unital = false) {
  TpReport rep;
  for (int i = 0; i < C.n; ++i)
    for (int j = i; j < C.n; ++j) {
      const Complex t = C.block(i, j).trace();
      const double want = (i == j) ? 1.0 : 0.0;
      rep.max_trace_violation =
          std::max(rep.max_trace_violation, std::abs(t - Complex(want, 0.0)));
    }
  const auto es = eigh(C.P);
  rep.min_eigenvalue = es.eigenvalues.size() ? es.eigenvalues(es.eigenvalues.size() - 1) : 0.0;
  if (check_unital)
    rep.unital_violation =
        (apply_channel(C, Matrix::Identity(C.n, C.n)) - Matrix::Identity(C.m, C.m)).norm();
  return rep;
}

}  // namespace qchan
