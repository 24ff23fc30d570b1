#include <catch2/catch_amalgamated.hpp>

#include "qchan/channel.hpp"
#include "qchan/random.hpp"

using namespace qchan;

namespace {

// Choi of the identity channel on dimension n: blocks P_ij = E_ij.
ChoiMatrix identity_choi(int n) {
  Matrix P = Matrix::Zero(Eigen::Index(n) * n, Eigen::Index(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      P(Eigen::Index(i) * n + i, Eigen::Index(j) * n + j) = 1.0;
  return ChoiMatrix(n, n, std::move(P));
}

}  // namespace

TEST_CASE("apply_channel: identity channel") {
  Rng rng(1);
  const ChoiMatrix C = identity_choi(3);
  for (int t = 0; t < 5; ++t) {
    const Matrix X = random_ginibre(3, 3, rng);
    CHECK((apply_channel(C, X) - X).norm() <= 1e-14 * X.norm());
  }
  CHECK_THROWS_AS(apply_channel(C, Matrix::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("apply_channel: completely depolarizing channel") {
  const int n = 3, m = 2;
  Matrix P = Matrix::Zero(n * m, n * m);
  for (int i = 0; i < n; ++i)
    P.block(Eigen::Index(i) * m, Eigen::Index(i) * m, m, m) =
        Matrix::Identity(m, m) / double(m);
  const ChoiMatrix C(n, m, std::move(P));
  Rng rng(2);
  const Matrix X = random_density(n, rng);
  CHECK((apply_channel(C, X) - Matrix::Identity(m, m) / double(m)).norm() <= 1e-14);
}

TEST_CASE("apply_channel on E_ij recovers the Choi blocks") {
  Rng rng(3);
  KrausSet K;
  K.ops.push_back(random_ginibre(2, 3, rng));
  K.ops.push_back(random_ginibre(2, 3, rng));
  const ChoiMatrix C = choi_from_kraus(K);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Matrix E = Matrix::Zero(3, 3);
      E(i, j) = 1.0;
      CHECK((apply_channel(C, E) - C.block(i, j)).norm() == 0.0);
    }
}

TEST_CASE("choi_from_kraus: identity Kraus operator") {
  KrausSet K;
  K.ops.push_back(Matrix::Identity(2, 2));
  RealVector d(1);
  d << 1.0;
  const ChoiMatrix C = choi_from_kraus(K, d);
  Matrix want(4, 4);
  want << 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1;
  CHECK((C.P - want).norm() == 0.0);
  CHECK(numerical_rank(C.P) == 1);
  CHECK(std::abs(C.P.trace().real() - 2.0) <= 1e-15);
}

TEST_CASE("choi_from_kraus: conjugation oracle and rank") {
  Rng rng(4);
  const Matrix U = random_unitary(3, rng);
  KrausSet K1;
  K1.ops.push_back(U);
  const ChoiMatrix C1 = choi_from_kraus(K1);
  for (int t = 0; t < 5; ++t) {
    const Matrix X = random_density(3, rng);
    CHECK((apply_channel(C1, X) - U * X * U.adjoint()).norm() <= 1e-12);
  }

  // Generic weighted mixture of r unitaries has Choi rank r.
  for (int r : {1, 2, 4}) {
    KrausSet K;
    for (int i = 0; i < r; ++i) K.ops.push_back(random_unitary(3, rng));
    const ChoiMatrix C = choi_from_kraus(K, random_simplex(r, rng));
    CHECK(numerical_rank(C.P) == r);
  }

  // Arbitrary (non-unitary) Kraus operator: still F X F*.
  const Matrix F = random_ginibre(2, 3, rng);
  KrausSet Kf;
  Kf.ops.push_back(F);
  const ChoiMatrix Cf = choi_from_kraus(Kf);
  const Matrix X = random_ginibre(3, 3, rng);
  CHECK((apply_channel(Cf, X) - F * X * F.adjoint()).norm() <= 1e-12 * X.norm());
}

TEST_CASE("choi_from_kraus input validation") {
  CHECK_THROWS_AS(choi_from_kraus(KrausSet{}), std::invalid_argument);
  KrausSet K;
  K.ops.push_back(Matrix::Identity(2, 2));
  RealVector bad(2);
  bad << 1, 1;
  CHECK_THROWS_AS(choi_from_kraus(K, bad), std::invalid_argument);
  RealVector neg(1);
  neg << -1.0;
  CHECK_THROWS_AS(choi_from_kraus(K, neg), std::invalid_argument);
}

TEST_CASE("kraus_from_choi: identity channel") {
  const KrausSet K = kraus_from_choi(identity_choi(2));
  REQUIRE(K.ops.size() == 1);
  // single Kraus operator proportional to the identity (global phase free)
  const Matrix Kop = K.ops[0];
  CHECK(std::abs(std::abs(Kop(0, 0)) - 1.0) <= 1e-12);
  CHECK((Kop - Kop(0, 0) * Matrix::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("kraus_from_choi: full-rank Choi gives nm operators") {
  const int n = 2, m = 3;
  const ChoiMatrix C(n, m, Matrix::Identity(n * m, n * m) / double(m));
  CHECK(kraus_from_choi(C).ops.size() == size_t(n * m));
}

TEST_CASE("kraus_from_choi round trip preserves the channel action") {
  Rng rng(5);
  KrausSet K;
  for (int i = 0; i < 3; ++i) K.ops.push_back(random_ginibre(2, 3, rng));
  const ChoiMatrix C = choi_from_kraus(K);
  const KrausSet K2 = kraus_from_choi(C);
  CHECK(K2.ops.size() == 3);
  const ChoiMatrix C2 = choi_from_kraus(K2);
  for (int t = 0; t < 20; ++t) {
    const Matrix X = random_density(3, rng);
    CHECK((apply_channel(C, X) - apply_channel(C2, X)).norm() <= 1e-11);
  }
}

TEST_CASE("kraus_from_choi rejects indefinite input") {
  Matrix P = Matrix::Identity(4, 4);
  P(3, 3) = -1.0;
  CHECK_THROWS_AS(kraus_from_choi(ChoiMatrix(2, 2, P)), std::invalid_argument);
}

TEST_CASE("kraus vectorization round trip and block identity") {
  Rng rng(6);
  const Matrix K = random_ginibre(2, 3, rng);
  const Eigen::VectorXcd v = kraus_vectorize(K);
  CHECK((kraus_devectorize(v, 3, 2) - K).norm() == 0.0);
  // block (p,q) of v v* equals K E_pq K*
  const Matrix vv = v * v.adjoint();
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      Matrix E = Matrix::Zero(3, 3);
      E(p, q) = 1.0;
      CHECK((vv.block(2 * p, 2 * q, 2, 2) - K * E * K.adjoint()).norm() <= 1e-13);
    }
}

TEST_CASE("completeness sum for trace-preserving Kraus sets") {
  Rng rng(7);
  KrausSet K;
  const RealVector d = random_simplex(2, rng);
  for (int i = 0; i < 2; ++i)
    K.ops.push_back(std::sqrt(d(i)) * random_unitary(3, rng));
  CHECK((K.completeness() - Matrix::Identity(3, 3)).norm() <= 1e-13);
  CHECK(K.input_dim() == 3);
  CHECK(K.output_dim() == 3);
}

TEST_CASE("validate_tp_choi") {
  const auto ok = validate_tp_choi(identity_choi(2), true);
  CHECK(ok.max_trace_violation <= 1e-15);
  CHECK(ok.min_eigenvalue >= -1e-15);
  REQUIRE(ok.unital_violation.has_value());
  CHECK(*ok.unital_violation <= 1e-15);

  const auto zero = validate_tp_choi(ChoiMatrix(2, 2, Matrix::Zero(4, 4)));
  CHECK(zero.max_trace_violation == 1.0);
  CHECK_FALSE(zero.unital_violation.has_value());
}

TEST_CASE("validate_density") {
  Rng rng(8);
  CHECK_NOTHROW(validate_density(random_density(4, rng)));
  CHECK_THROWS_AS(validate_density(0.9 * random_density(3, rng)),
                  std::invalid_argument);
  Matrix indef(2, 2);
  indef << 2, 0, 0, -1;
  CHECK_THROWS_AS(validate_density(indef), std::invalid_argument);
}
