#include <catch2/catch_amalgamated.hpp>

#include "qchan/instance_io.hpp"

using namespace qchan;

namespace {

GeneratedInstance gen(int n, int k, int r, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.n = spec.m = n;
  spec.k = k;
  spec.r = r;
  spec.seed = seed;
  return generate_feasible_instance(spec);
}

SolverConfig cfg_of(Method method, double toler = 1e-13, int iterlimit = 20000) {
  SolverConfig cfg;
  cfg.method = method;
  cfg.toler = toler;
  cfg.iterlimit = iterlimit;
  return cfg;
}

double feasibility_violation(const FeasibilityInstance& inst, const Matrix& P) {
  const ChoiMatrix C(inst.n, inst.m, P);
  double v = validate_tp_choi(C).max_trace_violation;
  for (int l = 0; l < inst.k; ++l)
    v = std::max(v, (apply_channel(C, inst.A[l]) - inst.B[l]).norm());
  return v;
}

}  // namespace

TEST_CASE("cos_angle on fixed displacements") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 0, 0, 1;
  b = Matrix::Zero(2, 2);
  CHECK(cos_angle(a, b, a) == Catch::Approx(1.0));  // collinear
  Matrix c(2, 2);
  c << 0, 1, 1, 0;  // orthogonal to the identity in the trace inner product
  CHECK(cos_angle(c, b, a) == Catch::Approx(0.0).margin(1e-15));
  CHECK(cos_angle(b, b, b) == 0.0);  // degenerate displacements

  CHECK(displacement_cosine(2 * a, a, b) == Catch::Approx(1.0));
  CHECK(displacement_cosine(a + c, a, 2 * a) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("MAP converges immediately from a feasible PSD point") {
  const auto g = gen(3, 2, 3, 1);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const SolveTrace tr = map_solve(L, g.P_true.P, cfg_of(Method::MAP, 1e-12));
  CHECK(tr.converged);
  CHECK(tr.iterations == 1);
  CHECK(tr.final_residual <= 1e-12);
}

TEST_CASE("DR converges immediately from a point of the intersection") {
  const auto g = gen(3, 2, 3, 1);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const SolveTrace tr = dr_solve(L, g.P_true.P, cfg_of(Method::DR, 1e-12));
  CHECK(tr.converged);
  CHECK(tr.iterations == 1);
}

TEST_CASE("MAP solution is a feasibility certificate") {
  const auto g = gen(4, 3, 4, 2);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  const SolveTrace tr =
      map_solve(L, double(D) * Matrix::Identity(D, D), cfg_of(Method::MAP, 1e-12));
  REQUIRE(tr.converged);
  CHECK(feasibility_violation(g.instance, tr.final_P) <= 1e-11);
  const auto es = eigh(tr.final_P);
  CHECK(es.eigenvalues(es.eigenvalues.size() - 1) >= -1e-11 * tr.final_P.norm());
}

TEST_CASE("DR solution is a feasibility certificate") {
  for (std::uint64_t seed : {3ull, 4ull}) {
    const auto g = gen(4, 3, 4, seed);
    const AffineOperator L = AffineOperator::assemble(g.instance);
    const Eigen::Index D = L.side();
    const SolveTrace tr =
        dr_solve(L, double(D) * Matrix::Identity(D, D), cfg_of(Method::DR, 1e-14));
    REQUIRE(tr.converged);
    CHECK(tr.final_residual <= 1e-13);
    CHECK(feasibility_violation(g.instance, tr.final_P) <= 1e-11);
  }
}

TEST_CASE("DR needs fewer iterations than MAP") {
  const auto g = gen(6, 4, 6, 5);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  const Matrix x0 = double(D) * Matrix::Identity(D, D);
  const SolveTrace dr = dr_solve(L, x0, cfg_of(Method::DR, 1e-12));
  const SolveTrace map = map_solve(L, x0, cfg_of(Method::MAP, 1e-12, 5000));
  REQUIRE(dr.converged);
  CHECK(dr.iterations < map.iterations);
}

TEST_CASE("MAP iterates are Fejer monotone with respect to a feasible point") {
  const auto g = gen(4, 3, 4, 6);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();

  // Re-run the alternation by hand to look at the intermediate points.
  Matrix a = double(D) * Matrix::Identity(D, D);
  double dist = (a - g.P_true.P).norm();
  for (int i = 0; i < 30; ++i) {
    const Matrix b = project_psd(a);
    const double db = (b - g.P_true.P).norm();
    CHECK(db <= dist + 1e-9 * dist);
    a = L.project(b);
    const double da = (a - g.P_true.P).norm();
    CHECK(da <= db + 1e-9 * db);
    dist = da;
  }
}

TEST_CASE("residual history is monotically informative and recorded") {
  const auto g = gen(4, 3, 4, 7);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  SolverConfig cfg = cfg_of(Method::DR, 1e-12);
  const SolveTrace tr = dr_solve(L, double(D) * Matrix::Identity(D, D), cfg);
  REQUIRE(tr.converged);
  CHECK(int(tr.residual_history.size()) == tr.iterations);
  CHECK(tr.residual_history.back() <= 1e-12);
  CHECK(tr.max_cos < 1.0);
  CHECK(tr.max_cos >= 0.0);
}

TEST_CASE("solvers are deterministic for a fixed instance") {
  const auto g = gen(4, 3, 4, 8);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  const Matrix x0 = double(D) * Matrix::Identity(D, D);
  const SolveTrace t1 = solve(L, x0, cfg_of(Method::DR));
  const SolveTrace t2 = solve(L, x0, cfg_of(Method::DR));
  CHECK(t1.iterations == t2.iterations);
  CHECK(t1.final_residual == t2.final_residual);
  CHECK((t1.final_P - t2.final_P).norm() == 0.0);
}

TEST_CASE("iteration limit is a normal nonconverged return") {
  const auto g = gen(4, 3, 4, 9);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  SolverConfig cfg = cfg_of(Method::DR, 1e-14, 1);
  const SolveTrace tr = solve(L, double(D) * Matrix::Identity(D, D), cfg);
  CHECK_FALSE(tr.converged);
  CHECK(tr.iterations == 1);
}

TEST_CASE("solver configuration is validated") {
  const auto g = gen(3, 2, 2, 1);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  SolverConfig bad;
  bad.toler = 0.0;
  CHECK_THROWS_AS(solve(L, Matrix::Identity(9, 9), bad), std::invalid_argument);
  bad = SolverConfig{};
  bad.iterlimit = 0;
  CHECK_THROWS_AS(solve(L, Matrix::Identity(9, 9), bad), std::invalid_argument);
  CHECK_THROWS_AS(solve(L, Matrix::Identity(4, 4), SolverConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rank_constrained_solve(L, Matrix::Identity(9, 9), SolverConfig{}),
                  std::invalid_argument);
}

TEST_CASE("rank bound equal to the full dimension changes nothing") {
  const auto g = gen(4, 3, 4, 10);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  const Matrix x0 = double(D) * Matrix::Identity(D, D);
  const SolveTrace plain = solve(L, x0, cfg_of(Method::DR));
  SolverConfig cfg = cfg_of(Method::DR);
  cfg.rank_bound = D;
  const SolveTrace bounded = rank_constrained_solve(L, x0, cfg);
  CHECK(plain.iterations == bounded.iterations);
  CHECK((plain.final_P - bounded.final_P).norm() == 0.0);
}

TEST_CASE("rank-constrained solve finds a point of the generator rank") {
  const auto g = gen(4, 3, 2, 11);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  SolverConfig cfg = cfg_of(Method::DR, 1e-12, 50000);
  cfg.rank_bound = 2;
  const SolveTrace tr =
      rank_constrained_solve(L, double(D) * Matrix::Identity(D, D), cfg);
  REQUIRE(tr.converged);
  CHECK(tr.final_rank <= 2);
  CHECK(feasibility_violation(g.instance, tr.final_P) <= 1e-10);
}

TEST_CASE("rank-1 solutions reproduce a unitary conjugation") {
  const auto g = gen(4, 3, 1, 12);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  SolverConfig cfg = cfg_of(Method::DR, 1e-12, 50000);
  cfg.rank_bound = 1;
  const SolveTrace tr =
      rank_constrained_solve(L, double(D) * Matrix::Identity(D, D), cfg);
  REQUIRE(tr.converged);
  CHECK(tr.final_rank == 1);
  // The found channel acts as conjugation by some unitary; on the constraint
  // inputs it must agree with the generator's unitary.
  const KrausSet K = kraus_from_choi(ChoiMatrix(4, 4, tr.final_P), 1e-9);
  REQUIRE(K.ops.size() == 1);
  const KrausSet Kt = kraus_from_choi(g.P_true, 1e-9);
  REQUIRE(Kt.ops.size() == 1);
  const Matrix& U = Kt.ops[0];
  for (const auto& A : g.instance.A)
    CHECK((apply_channel(ChoiMatrix(4, 4, tr.final_P), A) - U * A * U.adjoint()).norm() <=
          1e-9);
}

TEST_CASE("reflect-affine-first variant still solves the problem") {
  const auto g = gen(4, 3, 4, 13);
  const AffineOperator L = AffineOperator::assemble(g.instance);
  const Eigen::Index D = L.side();
  SolverConfig cfg = cfg_of(Method::DR, 1e-12);
  cfg.reflect_affine_first = true;
  const SolveTrace tr = solve(L, double(D) * Matrix::Identity(D, D), cfg);
  REQUIRE(tr.converged);
  CHECK(feasibility_violation(g.instance, tr.final_P) <= 1e-10);
}
