#pragma once

#include <chrono>

#include "qchan/constraints.hpp"

namespace qchan {

enum class Method { MAP, DR };

inline const char* method_name(Method m) { return m == Method::MAP ? "map" : "dr"; }

struct SolverConfig {
  double toler = 1e-14;
  int iterlimit = 3500;
  Method method = Method::DR;
  Eigen::Index rank_bound = 0;  // 0: plain PSD projection
  bool record_trace = true;
  // Escape hatch: reflect through the affine set first instead of the cone.
  bool reflect_affine_first = false;

  void validate(Eigen::Index side) const {
    if (toler <= 0) throw std::invalid_argument("config: toler must be positive");
    if (iterlimit < 1) throw std::invalid_argument("config: iterlimit must be >= 1");
    if (rank_bound < 0 || rank_bound > side)
      throw std::invalid_argument("config: rank bound out of range");
  }
};

struct SolveTrace {
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> cos_history;
  double max_cos = 0.0;
  double final_residual = 0.0;
  double psd_projection_seconds = 0.0;
  double affine_projection_seconds = 0.0;
  Matrix final_P;
  Eigen::Index final_rank = 0;
  bool converged = false;
};

// Cosine of the angle between a_next - b and a - b; 0 when either
// displacement has vanished (converged, angle undefined).
inline double cos_angle(const Matrix& a_next, const Matrix& b, const Matrix& a) {
  const Matrix u = a_next - b;
  const Matrix v = a - b;
  const double nu = u.norm(), nv = v.norm();
  if (nu < 1e-300 || nv < 1e-300) return 0.0;
  const double ip = (u.adjoint() * v).trace().real();
  return ip / (nu * nv);
}

// Cosine between the successive displacements c - b and b - a.
inline double displacement_cosine(const Matrix& c, const Matrix& b, const Matrix& a) {
  const Matrix u = c - b;
  const Matrix v = b - a;
  const double nu = u.norm(), nv = v.norm();
  if (nu < 1e-300 || nv < 1e-300) return 0.0;
  return (u.adjoint() * v).trace().real() / (nu * nv);
}

namespace detail {

class StopWatch {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  void stop(double& acc) {
    acc += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

inline void record(SolveTrace& tr, const SolverConfig& cfg, double resid, double cosv,
                   bool have_cos) {
  if (cfg.record_trace) tr.residual_history.push_back(resid);
  if (have_cos) {
    if (cfg.record_trace) tr.cos_history.push_back(cosv);
    tr.max_cos = std::max(tr.max_cos, cosv);
  }
}

inline Eigen::Index rank_from_positive_eigs(const SpectralDecomposition& es,
                                            const Matrix& P) {
  (void)P;
  return numerical_rank(es);
}

}  // namespace detail

// Alternating projections: b_l = proj_PSD(a_l), a_{l+1} = proj_affine(b_l).
// Stops when max(||residual(b_l)||, PSD violation of a_{l+1}) <= toler.
inline SolveTrace map_solve(const AffineOperator& L, const Matrix& P0,
                            const SolverConfig& cfg) {
  cfg.validate(L.side());
  if (P0.rows() != L.side() || P0.cols() != L.side())
    throw std::invalid_argument("map_solve: starting point dimension mismatch");
  SolveTrace tr;
  detail::StopWatch sw;

  Matrix a = P0;
  sw.start();
  SpectralDecomposition es = eigh(a);
  sw.stop(tr.psd_projection_seconds);

  for (int iter = 1; iter <= cfg.iterlimit; ++iter) {
    tr.iterations = iter;
    sw.start();
    const Matrix b = positive_part(es, cfg.rank_bound > 0 ? cfg.rank_bound : -1);
    sw.stop(tr.psd_projection_seconds);

    const double resid = L.residual(b).norm();
    sw.start();
    const Matrix a_next = L.project(b);
    sw.stop(tr.affine_projection_seconds);

    sw.start();
    SpectralDecomposition es_next = eigh(a_next);
    sw.stop(tr.psd_projection_seconds);
    const double lmin = es_next.eigenvalues(es_next.eigenvalues.size() - 1);
    const double psd_viol = std::max(0.0, -lmin);

    detail::record(tr, cfg, resid, cos_angle(a_next, b, a), iter > 0);
    tr.final_residual = resid;

    if (std::max(resid, psd_viol) <= cfg.toler) {
      tr.converged = true;
      tr.final_P = b;
      // positive part shares the spectrum of a, so reuse its decomposition
      tr.final_rank = numerical_rank(tr.final_P);
      return tr;
    }
    a = a_next;
    es = std::move(es_next);
  }
  tr.final_P = positive_part(es, cfg.rank_bound > 0 ? cfg.rank_bound : -1);
  tr.final_residual = L.residual(tr.final_P).norm();
  tr.final_rank = numerical_rank(tr.final_P);
  return tr;
}

// Reflect-reflect-average: x_{l+1} = (x_l + R_A(R_B(x_l)))/2 with B the PSD
// cone and A the affine set. The monitored iterate is proj_B(x_l);
// convergence is declared on its affine residual.
inline SolveTrace dr_solve(const AffineOperator& L, const Matrix& x0,
                           const SolverConfig& cfg) {
  cfg.validate(L.side());
  if (x0.rows() != L.side() || x0.cols() != L.side())
    throw std::invalid_argument("dr_solve: starting point dimension mismatch");
  SolveTrace tr;
  detail::StopWatch sw;

  Matrix x = x0;
  Matrix prev_monitor, prev_prev_monitor;

  for (int iter = 1; iter <= cfg.iterlimit; ++iter) {
    tr.iterations = iter;
    Matrix inner = x;
    if (cfg.reflect_affine_first) {
      sw.start();
      inner = reflect_through(x, L.project(x));
      sw.stop(tr.affine_projection_seconds);
    }
    sw.start();
    const SpectralDecomposition es = eigh(inner);
    const Matrix bpos = positive_part(es, cfg.rank_bound > 0 ? cfg.rank_bound : -1);
    sw.stop(tr.psd_projection_seconds);

    const double resid = L.residual(bpos).norm();

    double cosv = 0.0;
    bool have_cos = false;
    if (prev_prev_monitor.size() > 0) {
      cosv = displacement_cosine(bpos, prev_monitor, prev_prev_monitor);
      have_cos = true;
    }
    detail::record(tr, cfg, resid, cosv, have_cos);
    tr.final_residual = resid;

    if (resid <= cfg.toler) {
      tr.converged = true;
      tr.final_P = bpos;
      tr.final_rank = numerical_rank(tr.final_P);
      return tr;
    }

    const Matrix y = reflect_through(inner, bpos);
    if (cfg.reflect_affine_first) {
      x = 0.5 * (x + y);
    } else {
      sw.start();
      const Matrix z = reflect_through(y, L.project(y));
      sw.stop(tr.affine_projection_seconds);
      x = 0.5 * (x + z);
    }
    prev_prev_monitor = std::move(prev_monitor);
    prev_monitor = bpos;
  }
  // iterlimit exhaustion is a normal return; the caller inspects converged.
  {
    const SpectralDecomposition es = eigh(x);
    tr.final_P = positive_part(es, cfg.rank_bound > 0 ? cfg.rank_bound : -1);
  }
  tr.final_residual = L.residual(tr.final_P).norm();
  tr.final_rank = numerical_rank(tr.final_P);
  return tr;
}

inline SolveTrace solve(const AffineOperator& L, const Matrix& start,
                        const SolverConfig& cfg) {
  return cfg.method == Method::MAP ? map_solve(L, start, cfg) : dr_solve(L, start, cfg);
}

// Same engines with the nonconvex rank-restricted cone projection.
inline SolveTrace rank_constrained_solve(const AffineOperator& L, const Matrix& start,
                                         const SolverConfig& cfg) {
  if (cfg.rank_bound < 1)
    throw std::invalid_argument("rank_constrained_solve: rank bound required");
  return solve(L, start, cfg);
}

}  // namespace qchan
