#pragma once

#include <deque>
#include <numeric>

#include "qchan/solvers.hpp"

namespace qchan {

struct RankSearchReport {
  int rank_steps = 0;
  std::vector<int> per_step_iters;
  int min_iters = 0;
  int max_iters = 0;
  double mean_iters = 0.0;
  double max_cos = 0.0;
  Eigen::Index achieved_rank = 0;
  std::vector<Eigen::Index> rank_sequence;
  double residual = 0.0;
  // Residual of the step solution lifted back to the original space, one
  // entry per converged outer step.
  std::vector<double> step_residuals;
  bool converged = true;
  Matrix final_P;

  void finish_iter_stats() {
    if (per_step_iters.empty()) return;
    min_iters = *std::min_element(per_step_iters.begin(), per_step_iters.end());
    max_iters = *std::max_element(per_step_iters.begin(), per_step_iters.end());
    mean_iters = double(std::accumulate(per_step_iters.begin(), per_step_iters.end(), 0)) /
                 double(per_step_iters.size());
  }
};

struct HeuristicError : std::runtime_error {
  SolveTrace trace;
  HeuristicError(const std::string& msg, SolveTrace tr)
      : std::runtime_error(msg), trace(std::move(tr)) {}
};

// Barycenter heuristic for high-rank feasible points: solve from mn*I, keep
// the running barycenter of all feasible points found, restart from an
// overshoot P_c + 2^i ||d||^2 d (d = mn*I - tr(P_c) P_c) chosen just outside
// the cone, until the barycenter is full rank or the rank stops increasing.
inline RankSearchReport max_rank_search(const AffineOperator& L, const SolverConfig& cfg,
                                        int overshoot_imax = 60) {
  const Eigen::Index D = L.side();
  const Matrix I = Matrix::Identity(D, D);

  RankSearchReport rep;
  std::vector<Matrix> points;

  SolveTrace tr = solve(L, double(D) * I, cfg);
  rep.rank_steps = 1;
  rep.per_step_iters.push_back(tr.iterations);
  rep.max_cos = std::max(rep.max_cos, tr.max_cos);
  if (!tr.converged)
    throw HeuristicError("max_rank_search: first solve did not converge", std::move(tr));
  points.push_back(tr.final_P);

  Matrix Pc = tr.final_P;
  Eigen::Index rank_c = numerical_rank(Pc);
  rep.rank_sequence.push_back(rank_c);

  while (rank_c < D) {
    const Matrix d = double(D) * I - Pc.trace().real() * Pc;
    const double nd2 = d.squaredNorm();
    Matrix Pn;
    bool escaped = false;
    for (int i = 0; i <= overshoot_imax; ++i) {
      Pn = Pc + std::ldexp(nd2, i) * d;
      const auto es = eigh(Pn);
      if (es.eigenvalues(es.eigenvalues.size() - 1) < 0.0) {
        escaped = true;
        break;
      }
    }
    if (!escaped)
      throw HeuristicError("max_rank_search: overshoot never left the PSD cone",
                           std::move(tr));

    tr = solve(L, Pn, cfg);
    ++rep.rank_steps;
    rep.per_step_iters.push_back(tr.iterations);
    rep.max_cos = std::max(rep.max_cos, tr.max_cos);
    points.push_back(tr.final_P);

    Pc = Matrix::Zero(D, D);
    for (const auto& P : points) Pc += P;
    Pc /= double(points.size());

    const Eigen::Index new_rank = numerical_rank(Pc);
    rep.rank_sequence.push_back(new_rank);
    if (new_rank <= rank_c) {
      rank_c = new_rank;
      break;  // no increase in rank
    }
    rank_c = new_rank;
  }

  rep.achieved_rank = rank_c;
  rep.final_P = Pc;
  rep.residual = L.residual(Pc).norm();
  rep.converged = true;
  rep.finish_iter_stats();
  return rep;
}

// Facial reduction for low-rank feasible points: solve from the non-PSD
// start -mn*I so the limit is singular when a singular solution exists,
// compress to the minimal face through the compact spectral decomposition,
// re-solve in the smaller space, and repeat while the rank strictly drops.
inline RankSearchReport facial_reduction_min_rank(const AffineOperator& L,
                                                  const SolverConfig& cfg) {
  const Eigen::Index D = L.side();

  RankSearchReport rep;
  SolveTrace tr = solve(L, -double(D) * Matrix::Identity(D, D), cfg);
  rep.rank_steps = 1;
  rep.per_step_iters.push_back(tr.iterations);
  rep.max_cos = std::max(rep.max_cos, tr.max_cos);
  if (!tr.converged) {
    rep.converged = false;
    rep.final_P = tr.final_P;
    rep.residual = tr.final_residual;
    rep.finish_iter_stats();
    return rep;
  }

  Matrix P_cur = tr.final_P;              // current solution in the reduced space
  Matrix V_cum = Matrix::Identity(D, D);  // maps reduced space back to the original
  const AffineOperator* L_cur = &L;
  std::deque<AffineOperator> restricted;  // reference-stable storage

  Eigen::Index rank_cur = numerical_rank(P_cur);
  rep.rank_sequence.push_back(rank_cur);
  rep.step_residuals.push_back(L.residual(P_cur).norm());

  while (rank_cur > 1 && rank_cur < P_cur.rows()) {
    const auto es = eigh(P_cur);
    const double smax = es.eigenvalues.cwiseAbs().maxCoeff();
    const double th = double(es.eigenvalues.size()) *
                      (std::nextafter(smax, std::numeric_limits<double>::infinity()) - smax);
    Eigen::Index keep = 0;
    while (keep < es.eigenvalues.size() && es.eigenvalues(keep) > th) ++keep;
    if (keep == 0) break;
    const Matrix V = es.eigenvectors.leftCols(keep);

    restricted.push_back(L_cur->facial_restrict(V));
    const AffineOperator& Lr = restricted.back();
    L_cur = &Lr;
    V_cum = (V_cum * V).eval();
    // Current solution expressed inside the face: V* P_cur V = Diag(lambda).
    P_cur = Matrix(es.eigenvalues.head(keep).cast<Complex>().asDiagonal());

    SolveTrace trr =
        solve(Lr, -double(keep) * Matrix::Identity(keep, keep), cfg);
    ++rep.rank_steps;
    rep.per_step_iters.push_back(trr.iterations);
    rep.max_cos = std::max(rep.max_cos, trr.max_cos);
    if (!trr.converged) {
      rep.converged = false;
      break;  // best-so-far
    }
    const Eigen::Index new_rank = numerical_rank(trr.final_P);
    if (new_rank >= rank_cur) break;  // positive definite in the face: done
    P_cur = trr.final_P;
    rep.rank_sequence.push_back(new_rank);
    rep.step_residuals.push_back(
        L.residual(V_cum * P_cur * V_cum.adjoint()).norm());
    rank_cur = new_rank;
  }

  rep.final_P = V_cum * P_cur * V_cum.adjoint();
  rep.achieved_rank = numerical_rank(rep.final_P);
  rep.residual = L.residual(rep.final_P).norm();
  rep.finish_iter_stats();
  return rep;
}

// Descending scan of rank-constrained solves, warm-started from the previous
// solution; returns the smallest rank that still admitted a feasible point.
inline RankSearchReport rank_scan(const AffineOperator& L, Eigen::Index r_start,
                                  const SolverConfig& cfg, bool warm_start = true) {
  if (r_start < 1 || r_start > L.side())
    throw std::invalid_argument("rank_scan: starting rank out of range");
  const Eigen::Index D = L.side();

  RankSearchReport rep;
  Matrix start = double(D) * Matrix::Identity(D, D);
  bool any = false;
  SolveTrace last_fail;

  for (Eigen::Index rb = r_start; rb >= 1; --rb) {
    SolverConfig c = cfg;
    c.rank_bound = rb;
    SolveTrace tr = rank_constrained_solve(L, start, c);
    ++rep.rank_steps;
    rep.per_step_iters.push_back(tr.iterations);
    rep.max_cos = std::max(rep.max_cos, tr.max_cos);
    if (!tr.converged) {
      last_fail = std::move(tr);
      break;
    }
    any = true;
    rep.rank_sequence.push_back(rb);
    rep.achieved_rank = rb;
    rep.final_P = tr.final_P;
    rep.residual = tr.final_residual;
    if (warm_start) start = rep.final_P;
  }
  if (!any)
    throw HeuristicError("rank_scan: no feasible solution at the starting rank",
                         std::move(last_fail));
  rep.finish_iter_stats();
  return rep;
}

}  // namespace qchan
