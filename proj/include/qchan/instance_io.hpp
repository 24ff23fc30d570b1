#pragma once

#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "qchan/constraints.hpp"
#include "qchan/random.hpp"
#include "qchan/solvers.hpp"

namespace qchan {

struct GeneratorSpec {
  int n = 0;
  int m = 0;
  int k = 0;
  int r = 0;
  bool unital = true;
  std::uint64_t seed = kDefaultSeed;

  void validate() const {
    if (n < 1 || m < 1 || k < 1 || r < 1)
      throw std::invalid_argument("generator: dimensions must be positive");
    if (Eigen::Index(r) > Eigen::Index(n) * m)
      throw std::invalid_argument("generator: r exceeds nm");
    if (n != m)
      throw std::invalid_argument("generator: mixed-unitary construction needs m = n");
  }
};

struct GeneratedInstance {
  FeasibilityInstance instance;
  ChoiMatrix P_true;
};

// Mixed-unitary construction: P_true from r random unitaries and simplex
// weights, B_l the channel image of random densities A_l. Feasible of rank r
// by construction.
inline GeneratedInstance generate_feasible_instance(const GeneratorSpec& spec, Rng& rng) {
  spec.validate();
  KrausSet K;
  for (int i = 0; i < spec.r; ++i) K.ops.push_back(random_unitary(spec.n, rng));
  const RealVector d = random_simplex(spec.r, rng);
  ChoiMatrix P = choi_from_kraus(K, d);

  FeasibilityInstance inst;
  inst.n = spec.n;
  inst.m = spec.m;
  inst.k = spec.k;
  inst.unital = spec.unital;
  for (int l = 0; l < spec.k; ++l) {
    inst.A.push_back(random_density(spec.n, rng));
    inst.B.push_back(apply_channel(P, inst.A.back()));
  }
  return {std::move(inst), std::move(P)};
}

inline GeneratedInstance generate_feasible_instance(const GeneratorSpec& spec) {
  Rng rng(spec.seed);
  return generate_feasible_instance(spec, rng);
}

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- JSON helpers: complex matrices as row-major arrays of [re, im] ----

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      row.push_back({M(i, j).real(), M(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw ParseError("malformed matrix at " + where);
  const auto rows = j.size();
  const auto cols = j.front().size();
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError("ragged matrix at " + where + ", row " + std::to_string(i));
    for (size_t jj = 0; jj < cols; ++jj) {
      const auto& e = j[i][jj];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ParseError("entry is not an [re, im] pair at " + where + "[" +
                         std::to_string(i) + "][" + std::to_string(jj) + "]");
      M(Eigen::Index(i), Eigen::Index(jj)) =
          Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return M;
}

struct InstanceFile {
  FeasibilityInstance instance;
  std::optional<ChoiMatrix> P_true;
  std::uint64_t seed = kDefaultSeed;
};

inline void write_instance(const std::string& path, const FeasibilityInstance& inst,
                           const std::optional<ChoiMatrix>& P_true = std::nullopt,
                           std::uint64_t seed = kDefaultSeed) {
  nlohmann::json j;
  j["n"] = inst.n;
  j["m"] = inst.m;
  j["k"] = inst.k;
  j["unital"] = inst.unital;
  j["seed"] = seed;
  j["A"] = nlohmann::json::array();
  j["B"] = nlohmann::json::array();
  for (const auto& A : inst.A) j["A"].push_back(matrix_to_json(A));
  for (const auto& B : inst.B) j["B"].push_back(matrix_to_json(B));
  if (P_true) j["P_true"] = matrix_to_json(P_true->P);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

inline InstanceFile read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  InstanceFile f;
  try {
    f.instance.n = j.at("n").get<int>();
    f.instance.m = j.at("m").get<int>();
    f.instance.k = j.at("k").get<int>();
    f.instance.unital = j.at("unital").get<bool>();
    f.seed = j.value("seed", std::uint64_t(kDefaultSeed));
    for (size_t l = 0; l < j.at("A").size(); ++l)
      f.instance.A.push_back(matrix_from_json(j["A"][l], "A[" + std::to_string(l) + "]"));
    for (size_t l = 0; l < j.at("B").size(); ++l)
      f.instance.B.push_back(matrix_from_json(j["B"][l], "B[" + std::to_string(l) + "]"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    f.instance.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (j.contains("P_true")) {
    Matrix P = import_hermitian(matrix_from_json(j["P_true"], "P_true"));
    f.P_true = ChoiMatrix(f.instance.n, f.instance.m, std::move(P));
  }
  return f;
}

// ---- Solution files: Choi matrix plus certificate numbers ----

inline void write_solution(const std::string& path, const ChoiMatrix& P,
                           const SolveTrace& trace, Method method,
                           const SolverConfig& cfg) {
  nlohmann::json j;
  j["n"] = P.n;
  j["m"] = P.m;
  j["P"] = matrix_to_json(P.P);
  j["residual"] = trace.final_residual;
  j["rank"] = trace.final_rank;
  j["iterations"] = trace.iterations;
  j["converged"] = trace.converged;
  j["max_cos"] = trace.max_cos;
  j["method"] = method_name(method);
  j["config"] = {{"toler", cfg.toler},
                 {"iterlimit", cfg.iterlimit},
                 {"rank_bound", cfg.rank_bound}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

inline ChoiMatrix read_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  Matrix P = import_hermitian(matrix_from_json(j.at("P"), "P"), 1e-10);
  return ChoiMatrix(j.at("n").get<int>(), j.at("m").get<int>(), std::move(P));
}

// ---- Benchmark report rows (CSV) ----

inline constexpr const char* kReportHeader =
    "m,n,k,r,method,iters,converged,residual,max_cos,rank,psd_seconds,affine_seconds,"
    "wall_seconds";

struct ReportRow {
  int m = 0, n = 0, k = 0, r = 0;
  std::string method;
  int iters = 0;
  bool converged = false;
  double residual = 0.0;
  double max_cos = 0.0;
  Eigen::Index rank = 0;
  double psd_seconds = 0.0;
  double affine_seconds = 0.0;
  double wall_seconds = 0.0;

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << m << ',' << n << ',' << k << ',' << r << ',' << method << ',' << iters << ','
       << (converged ? 1 : 0) << ',' << residual << ',' << max_cos << ',' << rank << ','
       << psd_seconds << ',' << affine_seconds << ',' << wall_seconds;
    return os.str();
  }
};

class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    out_ << kReportHeader << "\n";
  }

  void write(const ReportRow& row) { out_ << row.csv() << "\n"; }

 private:
  std::ofstream out_;
};

}  // namespace qchan
