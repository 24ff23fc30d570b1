#pragma once

#include <Eigen/Sparse>

#include <functional>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "qchan/channel.hpp"

namespace qchan {

// The data of the channel construction problem: find a trace-preserving
// Choi matrix P with apply_channel(P, A_l) = B_l for all l.
struct FeasibilityInstance {
  int n = 0;
  int m = 0;
  int k = 0;
  bool unital = false;
  std::vector<Matrix> A;  // k density matrices, n x n
  std::vector<Matrix> B;  // k density matrices, m x m

  void validate(double tol = 1e-10) const {
    if (n < 1 || m < 1 || k < 0) throw std::invalid_argument("instance: bad dimensions");
    if (int(A.size()) != k || int(B.size()) != k)
      throw std::invalid_argument("instance: constraint count mismatch");
    for (int l = 0; l < k; ++l) {
      if (A[l].rows() != n || A[l].cols() != n || B[l].rows() != m || B[l].cols() != m)
        throw std::invalid_argument("instance: matrix size mismatch at constraint " +
                                    std::to_string(l));
      validate_density(A[l], tol);
      validate_density(B[l], tol);
    }
  }
};

struct RowLabel {
  enum class Kind { Channel, Trace, Unital };
  Kind kind = Kind::Trace;
  int ell = -1;  // constraint index for channel rows
  int s = 0, t = 0;
  bool imag = false;

  std::string str() const {
    std::string base;
    switch (kind) {
      case Kind::Channel: base = "channel[" + std::to_string(ell) + "]"; break;
      case Kind::Trace: base = "trace"; break;
      case Kind::Unital: base = "unital"; break;
    }
    return base + "(" + std::to_string(s) + "," + std::to_string(t) + ")" +
           (imag ? ".im" : ".re");
  }
};

struct AffineInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Real matrix representation of the constraint map acting on svec
// coordinates, with right-hand side and a cached Moore-Penrose
// factorization. Every row is svec(G) for a Hermitian representer G, so
// (L svec(P))_r = Re tr(G_r* P). Immutable after assembly.
class AffineOperator {
 public:
  using SparseRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  using Triplet = Eigen::Triplet<double>;

  static AffineOperator assemble(const FeasibilityInstance& inst) {
    inst.validate();
    AffineOperator op;
    op.n_ = inst.n;
    op.m_ = inst.m;
    op.side_ = Eigen::Index(inst.n) * inst.m;

    std::vector<Triplet> trips;
    std::vector<double> rhs;
    int row = 0;

    auto add_channel_block = [&](const Matrix& A, const Matrix& B, RowLabel::Kind kind,
                                 int ell) {
      const Matrix S = A.conjugate();  // representer n-side factor
      for (int s = 0; s < inst.m; ++s)
        for (int t = s; t < inst.m; ++t) {
          // Re part: T-factor (E_st + E_ts)/2.
          std::vector<std::tuple<int, int, Complex>> Tre;
          if (s == t)
            Tre.emplace_back(s, s, Complex(1, 0));
          else {
            Tre.emplace_back(s, t, Complex(0.5, 0));
            Tre.emplace_back(t, s, Complex(0.5, 0));
          }
          emit_kron_row(S, Tre, inst.m, row, trips);
          rhs.push_back(B(s, t).real());
          op.labels_.push_back({kind, ell, s, t, false});
          ++row;
          if (s < t) {
            // Im part: T-factor (E_ts - E_st)/(2i).
            std::vector<std::tuple<int, int, Complex>> Tim = {
                {t, s, Complex(0, -0.5)}, {s, t, Complex(0, 0.5)}};
            emit_kron_row(S, Tim, inst.m, row, trips);
            rhs.push_back(B(s, t).imag());
            op.labels_.push_back({kind, ell, s, t, true});
            ++row;
          }
        }
    };

    for (int l = 0; l < inst.k; ++l)
      add_channel_block(inst.A[l], inst.B[l], RowLabel::Kind::Channel, l);

    // Trace rows tr(P_ij) = delta_ij, representer S-factor on the n side and
    // T-factor = I_m.
    {
      std::vector<std::tuple<int, int, Complex>> Tid;
      for (int s = 0; s < inst.m; ++s) Tid.emplace_back(s, s, Complex(1, 0));
      for (int i = 0; i < inst.n; ++i)
        for (int j = i; j < inst.n; ++j) {
          Matrix S = Matrix::Zero(inst.n, inst.n);
          if (i == j)
            S(i, i) = Complex(1, 0);
          else {
            S(i, j) = Complex(0.5, 0);
            S(j, i) = Complex(0.5, 0);
          }
          emit_kron_row(S, Tid, inst.m, row, trips);
          rhs.push_back(i == j ? 1.0 : 0.0);
          op.labels_.push_back({RowLabel::Kind::Trace, -1, i, j, false});
          ++row;
          if (i < j) {
            Matrix Si = Matrix::Zero(inst.n, inst.n);
            Si(j, i) = Complex(0, -0.5);
            Si(i, j) = Complex(0, 0.5);
            emit_kron_row(Si, Tid, inst.m, row, trips);
            rhs.push_back(0.0);
            op.labels_.push_back({RowLabel::Kind::Trace, -1, i, j, true});
            ++row;
          }
        }
    }

    if (inst.unital)
      add_channel_block(Matrix::Identity(inst.n, inst.n),
                        Matrix::Identity(inst.m, inst.m), RowLabel::Kind::Unital, inst.k);

    op.rows_.resize(row, op.side_ * op.side_);
    op.rows_.setFromTriplets(trips.begin(), trips.end());
    op.rows_.makeCompressed();
    op.b_ = Eigen::Map<const RealVector>(rhs.data(), Eigen::Index(rhs.size()));
    op.factorize();
    return op;
  }

  Eigen::Index side() const { return side_; }
  Eigen::Index num_rows() const { return rows_.rows(); }
  Eigen::Index num_cols() const { return rows_.cols(); }
  int n() const { return n_; }
  int m() const { return m_; }
  const SparseRow& rows() const { return rows_; }
  const RealVector& rhs() const { return b_; }
  const std::vector<RowLabel>& row_labels() const { return labels_; }
  Eigen::Index rank() const { return rank_; }
  bool consistent() const { return consistent_; }

  RealVector apply(const RealVector& x) const { return rows_ * x; }

  // b - L svec(P); its Euclidean norm is the reported norm-residual.
  RealVector residual(const Matrix& P) const {
    if (P.rows() != side_ || P.cols() != side_)
      throw std::invalid_argument("residual: dimension mismatch");
    return b_ - rows_ * svec(P);
  }

  double residual_norm(const Matrix& P) const { return residual(P).norm(); }

  // Pseudoinverse of the Gram matrix L L^T applied through the cached
  // per-component eigendecompositions.
  RealVector gram_pinv_apply(const RealVector& r) const {
    RealVector y = RealVector::Zero(r.size());
    for (const auto& c : blocks_) {
      if (c.inv_eigs.size() == 0) continue;
      RealVector rc(c.rows.size());
      for (size_t i = 0; i < c.rows.size(); ++i) rc(Eigen::Index(i)) = r(c.rows[i]);
      const RealVector yc =
          c.basis * (c.inv_eigs.asDiagonal() * (c.basis.transpose() * rc));
      for (size_t i = 0; i < c.rows.size(); ++i) y(c.rows[i]) = yc(Eigen::Index(i));
    }
    return y;
  }

  // L^dag r = L^T (L L^T)^dag r.
  RealVector apply_pinv(const RealVector& r) const {
    return rows_.transpose() * gram_pinv_apply(r);
  }

  // Nearest point of the affine set: P + smat(L^dag (b - L svec(P))). The
  // correction stays in the row space, so iterative refinement of the
  // residual preserves nearest-point optimality.
  Matrix project(const Matrix& P) const {
    if (!consistent_)
      throw AffineInfeasibleError("project_affine: right-hand side not in range");
    RealVector x = svec(P);
    const double bn = 1.0 + b_.norm();
    const RealVector r0 = b_ - rows_ * x;
    if (r0.norm() > 1e-15 * bn) x += rows_.transpose() * gram_pinv_apply(r0);
    // One refinement pass once the iterate is close, where the accuracy of
    // the cached factorization limits the attainable residual.
    if (r0.norm() <= 1e-6 * bn) {
      const RealVector r1 = b_ - rows_ * x;
      if (r1.norm() > 1e-15 * bn) x += rows_.transpose() * gram_pinv_apply(r1);
    }
    return smat(x);
  }

  // Compression of every row's Hermitian representer to V* G V; the result
  // acts on svec of r x r Hermitian matrices with the same right-hand side.
  AffineOperator facial_restrict(const Matrix& V) const {
    if (V.rows() != side_) throw std::invalid_argument("facial_restrict: V row mismatch");
    const Eigen::Index r = V.cols();
    if ((V.adjoint() * V - Matrix::Identity(r, r)).norm() > 1e-12 * double(r))
      throw std::invalid_argument("facial_restrict: columns are not orthonormal");
    AffineOperator op;
    op.n_ = n_;
    op.m_ = m_;
    op.side_ = r;
    op.labels_ = labels_;
    op.b_ = b_;
    std::vector<Triplet> trips;
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      const Matrix G = row_representer(i);
      const Matrix Gr = V.adjoint() * (G * V);
      const RealVector v = svec(0.5 * (Gr + Gr.adjoint()));
      for (Eigen::Index j = 0; j < v.size(); ++j)
        if (v(j) != 0.0) trips.emplace_back(int(i), int(j), v(j));
    }
    op.rows_.resize(rows_.rows(), r * r);
    op.rows_.setFromTriplets(trips.begin(), trips.end());
    op.rows_.makeCompressed();
    op.factorize();
    return op;
  }

  // Hermitian representer G_r with row = svec(G_r).
  Matrix row_representer(Eigen::Index i) const {
    RealVector v = RealVector::Zero(rows_.cols());
    for (SparseRow::InnerIterator it(rows_, i); it; ++it) v(it.col()) = it.value();
    return smat(v);
  }

 private:
  AffineOperator() = default;

  struct GramBlock {
    std::vector<int> rows;
    RealMatrix basis;     // eigenvectors of the Gram block, kept columns
    RealVector inv_eigs;  // reciprocals of the kept eigenvalues
  };

  // svec coefficients of the Hermitian Kronecker representer S (x) T, with S
  // an n-side dense factor and T given by its nonzero entries.
  static void emit_kron_row(const Matrix& S,
                            const std::vector<std::tuple<int, int, Complex>>& T, int m,
                            int row, std::vector<Triplet>& trips) {
    static const double rt2 = std::sqrt(2.0);
    const int n = int(S.rows());
    const Eigen::Index D = Eigen::Index(n) * m;
    const Eigen::Index noff = D * (D - 1) / 2;
    auto pair_index = [&](Eigen::Index g1, Eigen::Index g2) {
      return g1 * (2 * D - g1 - 1) / 2 + (g2 - g1 - 1);
    };
    auto push = [&](Eigen::Index idx, double val) {
      if (val != 0.0) trips.emplace_back(row, int(idx), val);
    };
    for (int i = 0; i < n; ++i) {
      const Complex Sii = S(i, i);
      for (const auto& [s, t, val] : T) {
        if (s == t)
          push(Eigen::Index(i) * m + s, (Sii * val).real());
        else if (s < t) {
          const Eigen::Index g1 = Eigen::Index(i) * m + s, g2 = Eigen::Index(i) * m + t;
          const Complex z = Sii * val;
          const Eigen::Index p = pair_index(g1, g2);
          push(D + p, rt2 * z.real());
          push(D + noff + p, rt2 * z.imag());
        }
      }
      for (int j = i + 1; j < n; ++j) {
        const Complex Sij = S(i, j);
        if (Sij == Complex(0, 0)) continue;
        for (const auto& [s, t, val] : T) {
          const Eigen::Index g1 = Eigen::Index(i) * m + s, g2 = Eigen::Index(j) * m + t;
          const Complex z = Sij * val;
          const Eigen::Index p = pair_index(g1, g2);
          push(D + p, rt2 * z.real());
          push(D + noff + p, rt2 * z.imag());
        }
      }
    }
  }

  static void sym_eigh(RealMatrix& A, RealVector& w) {
    w.resize(A.rows());
    if (A.rows() == 0) return;
    const int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L',
                                    static_cast<lapack_int>(A.rows()), A.data(),
                                    static_cast<lapack_int>(A.rows()), w.data());
    if (info != 0)
      throw std::runtime_error("gram factorization: dsyevd failed, info=" +
                               std::to_string(info));
  }

  void factorize() {
    const Eigen::Index q = rows_.rows();
    // Gram matrix of the rows; couplings below rounding level are dropped so
    // that mutually orthogonal row groups factor into independent blocks.
    Eigen::SparseMatrix<double> W;
    const double dense_budget = 2e8;
    if (double(q) * double(rows_.cols()) <= dense_budget) {
      const RealMatrix Ld = RealMatrix(rows_);
      const RealMatrix Wd = Ld * Ld.transpose();
      std::vector<Triplet> wt;
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < q; ++j) {
          const double cut = 1e-12 * std::sqrt(std::abs(Wd(i, i) * Wd(j, j)));
          if (i == j || std::abs(Wd(i, j)) > cut)
            wt.emplace_back(int(i), int(j), Wd(i, j));
        }
      W.resize(q, q);
      W.setFromTriplets(wt.begin(), wt.end());
    } else {
      const Eigen::SparseMatrix<double> Lc = rows_;
      Eigen::SparseMatrix<double> Wfull = Lc * Eigen::SparseMatrix<double>(Lc.transpose());
      RealVector diag(q);
      for (Eigen::Index i = 0; i < q; ++i) diag(i) = Wfull.coeff(i, i);
      std::vector<Triplet> wt;
      for (Eigen::Index o = 0; o < Wfull.outerSize(); ++o)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Wfull, o); it; ++it) {
          const double cut =
              1e-12 * std::sqrt(std::abs(diag(it.row()) * diag(it.col())));
          if (it.row() == it.col() || std::abs(it.value()) > cut)
            wt.emplace_back(int(it.row()), int(it.col()), it.value());
        }
      W.resize(q, q);
      W.setFromTriplets(wt.begin(), wt.end());
    }
    W.makeCompressed();

    // Connected components of the Gram sparsity graph.
    std::vector<int> parent(static_cast<size_t>(q), 0);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[size_t(a)] != a) {
        parent[size_t(a)] = parent[size_t(parent[size_t(a)])];
        a = parent[size_t(a)];
      }
      return a;
    };
    for (Eigen::Index o = 0; o < W.outerSize(); ++o)
      for (Eigen::SparseMatrix<double>::InnerIterator it(W, o); it; ++it) {
        const int a = find(int(it.row())), b = find(int(it.col()));
        if (a != b) parent[size_t(a)] = b;
      }
    std::vector<std::vector<int>> comps(static_cast<size_t>(q));
    for (int i = 0; i < int(q); ++i) comps[size_t(find(i))].push_back(i);

    // Per-component dense eigendecomposition; the cut is relative to the
    // largest Gram eigenvalue over all components.
    struct Raw {
      std::vector<int> rows;
      RealMatrix vecs;
      RealVector eigs;
    };
    std::vector<Raw> raws;
    double lmax = 0.0;
    for (auto& comp : comps) {
      if (comp.empty()) continue;
      Raw raw;
      raw.rows = std::move(comp);
      const Eigen::Index c = Eigen::Index(raw.rows.size());
      RealMatrix Wc(c, c);
      for (Eigen::Index a = 0; a < c; ++a)
        for (Eigen::Index bcol = 0; bcol < c; ++bcol)
          Wc(a, bcol) = W.coeff(raw.rows[size_t(a)], raw.rows[size_t(bcol)]);
      sym_eigh(Wc, raw.eigs);
      raw.vecs = std::move(Wc);
      if (raw.eigs.size()) lmax = std::max(lmax, raw.eigs(raw.eigs.size() - 1));
      raws.push_back(std::move(raw));
    }
    const double cut = 1e-11 * lmax;
    rank_ = 0;
    blocks_.clear();
    for (auto& raw : raws) {
      GramBlock blk;
      blk.rows = std::move(raw.rows);
      std::vector<Eigen::Index> keep;
      for (Eigen::Index j = 0; j < raw.eigs.size(); ++j)
        if (raw.eigs(j) > cut) keep.push_back(j);
      blk.basis.resize(Eigen::Index(blk.rows.size()), Eigen::Index(keep.size()));
      blk.inv_eigs.resize(Eigen::Index(keep.size()));
      for (size_t j = 0; j < keep.size(); ++j) {
        blk.basis.col(Eigen::Index(j)) = raw.vecs.col(keep[j]);
        blk.inv_eigs(Eigen::Index(j)) = 1.0 / raw.eigs(keep[j]);
      }
      rank_ += Eigen::Index(keep.size());
      blocks_.push_back(std::move(blk));
    }

    const double bn = b_.norm();
    const double incons = (b_ - rows_ * apply_pinv(b_)).norm();
    consistent_ = incons <= 1e-8 * std::max(bn, 1e-300);
  }

  int n_ = 0, m_ = 0;
  Eigen::Index side_ = 0;
  SparseRow rows_;
  RealVector b_;
  std::vector<RowLabel> labels_;
  std::vector<GramBlock> blocks_;
  Eigen::Index rank_ = 0;
  bool consistent_ = true;
};

}  // namespace qchan
