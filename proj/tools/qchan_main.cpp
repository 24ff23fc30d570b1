// Command-line front end: generate feasibility instances, run the
// projection solvers and rank heuristics, and emit benchmark reports.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "qchan/heuristics.hpp"
#include "qchan/instance_io.hpp"

namespace {

using namespace qchan;

constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct SolveFlags {
  std::string method = "dr";
  double toler = 1e-14;
  int iterlimit = 3500;
  Eigen::Index rank_bound = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--method", method, "Projection method: map or dr")
        ->check(CLI::IsMember({"map", "dr"}));
    cmd->add_option("--toler", toler, "Residual tolerance");
    cmd->add_option("--iterlimit", iterlimit, "Maximum iterations per solve");
    cmd->add_option("--rank-bound", rank_bound,
                    "Rank bound for the nonconvex cone projection");
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.toler = toler;
    cfg.iterlimit = iterlimit;
    cfg.rank_bound = rank_bound;
    cfg.method = (method == "map") ? Method::MAP : Method::DR;
    return cfg;
  }
};

// Reload a written solution and re-check it against the instance file with
// freshly assembled constraints; shares no state with the solver run.
bool verify_solution_file(const std::string& instance_path,
                          const std::string& solution_path, double tol) {
  const InstanceFile f = read_instance(instance_path);
  const ChoiMatrix C = read_solution(solution_path);
  const AffineOperator L = AffineOperator::assemble(f.instance);
  const double resid = L.residual(C.P).norm();
  const auto tp = validate_tp_choi(C, f.instance.unital);
  double channel_viol = 0;
  for (int l = 0; l < f.instance.k; ++l)
    channel_viol =
        std::max(channel_viol, (apply_channel(C, f.instance.A[l]) - f.instance.B[l]).norm());
  const double scale = std::max(1.0, C.P.norm());
  const bool ok = resid <= tol * scale && tp.max_trace_violation <= tol * scale &&
                  tp.min_eigenvalue >= -tol * scale && channel_viol <= tol * scale;
  std::cout << "verify: residual=" << resid << " trace_viol=" << tp.max_trace_violation
            << " min_eig=" << tp.min_eigenvalue << " channel_viol=" << channel_viol
            << " -> " << (ok ? "ok" : "FAILED") << "\n";
  return ok;
}

void print_trace(const SolveTrace& tr, Eigen::Index rank) {
  std::cout << "iterations " << tr.iterations << "\n"
            << "converged " << (tr.converged ? "yes" : "no") << "\n"
            << "residual " << tr.final_residual << "\n"
            << "max_cos " << tr.max_cos << "\n"
            << "rank " << rank << "\n"
            << "psd_seconds " << tr.psd_projection_seconds << "\n"
            << "affine_seconds " << tr.affine_projection_seconds << "\n";
}

void write_rank_report(const std::string& path, const std::string& kind,
                       const RankSearchReport& rep) {
  nlohmann::json j;
  j["kind"] = kind;
  j["rank_steps"] = rep.rank_steps;
  j["per_step_iters"] = rep.per_step_iters;
  j["min_iters"] = rep.min_iters;
  j["max_iters"] = rep.max_iters;
  j["mean_iters"] = rep.mean_iters;
  j["max_cos"] = rep.max_cos;
  j["achieved_rank"] = rep.achieved_rank;
  j["rank_sequence"] = rep.rank_sequence;
  j["residual"] = rep.residual;
  j["converged"] = rep.converged;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Construct quantum channels mapping given density matrices to "
               "given density matrices via projection methods"};
  app.require_subcommand(1);
  app.set_config("--config");

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "Generate a random feasible instance");
  GeneratorSpec spec;
  std::string gen_out = "instance.json";
  bool no_unital = false, no_ptrue = false;
  gen->add_option("--n", spec.n, "Input dimension (m defaults to n)")->required();
  gen->add_option("--m", spec.m, "Output dimension");
  gen->add_option("--k", spec.k, "Number of density-matrix pairs")->required();
  gen->add_option("--r", spec.r, "Rank of the generated Choi matrix")->required();
  gen->add_option("--seed", spec.seed, "RNG seed");
  gen->add_flag("--no-unital", no_unital, "Drop the unital constraint");
  gen->add_flag("--no-ptrue", no_ptrue, "Do not store the generating Choi matrix");
  gen->add_option("--out", gen_out, "Output path");

  // ---- solve ----
  auto* solve_cmd = app.add_subcommand("solve", "Solve an instance with MAP or DR");
  std::string solve_in, solve_out, start = "identity";
  SolveFlags sflags;
  solve_cmd->add_option("instance", solve_in, "Instance file")->required();
  sflags.attach(solve_cmd);
  solve_cmd->add_option("--start", start, "Starting point: identity (mn*I), neg-identity, zero")
      ->check(CLI::IsMember({"identity", "neg-identity", "zero"}));
  solve_cmd->add_option("--out", solve_out, "Solution output path");

  // ---- maxrank / minrank / rankscan ----
  auto* maxrank = app.add_subcommand("maxrank", "Barycenter search for a max-rank solution");
  auto* minrank = app.add_subcommand("minrank", "Facial-reduction search for a low-rank solution");
  auto* rankscan = app.add_subcommand("rankscan", "Descending rank-constrained scan");
  std::string h_in, h_out;
  SolveFlags hflags;
  Eigen::Index rstart = 0;
  for (auto* cmd : {maxrank, minrank, rankscan}) {
    cmd->add_option("instance", h_in, "Instance file")->required();
    hflags.attach(cmd);
    cmd->add_option("--out", h_out, "Report output path");
  }
  rankscan->add_option("--rstart", rstart, "Starting constraint rank")->required();

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Run a grid of generated instances");
  std::string grid_in, bench_out = "report.csv";
  bench->add_option("grid", grid_in, "Grid file (JSON)")->required();
  bench->add_option("--out", bench_out, "CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (gen->parsed()) {
    if (spec.m == 0) spec.m = spec.n;
    spec.unital = !no_unital;
    auto g = generate_feasible_instance(spec);
    write_instance(gen_out, g.instance,
                   no_ptrue ? std::nullopt : std::optional<ChoiMatrix>(g.P_true),
                   spec.seed);
    std::cout << "wrote " << gen_out << " (n=" << spec.n << " m=" << spec.m
              << " k=" << spec.k << " r=" << spec.r << " seed=" << spec.seed << ")\n";
    return 0;
  }

  if (solve_cmd->parsed()) {
    const InstanceFile f = read_instance(solve_in);
    const AffineOperator L = AffineOperator::assemble(f.instance);
    const SolverConfig cfg = sflags.config();
    const Eigen::Index D = L.side();
    Matrix x0;
    if (start == "identity")
      x0 = double(D) * Matrix::Identity(D, D);
    else if (start == "neg-identity")
      x0 = -double(D) * Matrix::Identity(D, D);
    else
      x0 = Matrix::Zero(D, D);
    const SolveTrace tr =
        cfg.rank_bound > 0 ? rank_constrained_solve(L, x0, cfg) : solve(L, x0, cfg);
    print_trace(tr, tr.final_rank);
    if (!solve_out.empty()) {
      write_solution(solve_out, ChoiMatrix(f.instance.n, f.instance.m, tr.final_P), tr,
                     cfg.method, cfg);
      if (tr.converged && !verify_solution_file(solve_in, solve_out, 1e-9)) return kExitNotConverged;
    }
    return tr.converged ? 0 : kExitNotConverged;
  }

  auto run_heuristic = [&](const char* kind) -> int {
    const InstanceFile f = read_instance(h_in);
    const AffineOperator L = AffineOperator::assemble(f.instance);
    SolverConfig cfg = hflags.config();
    // The facial-reduction loop relies on alternating projections reaching a
    // singular limit from the non-PSD start; reflections do not.
    if (std::string(kind) == "minrank" && minrank->count("--method") == 0)
      cfg.method = Method::MAP;
    RankSearchReport rep;
    try {
      if (std::string(kind) == "maxrank")
        rep = max_rank_search(L, cfg);
      else if (std::string(kind) == "minrank")
        rep = facial_reduction_min_rank(L, cfg);
      else
        rep = rank_scan(L, rstart, cfg);
    } catch (const HeuristicError& e) {
      std::cerr << "error: " << e.what() << " (iterations " << e.trace.iterations
                << ", residual " << e.trace.final_residual << ")\n";
      return kExitNotConverged;
    }
    std::cout << "rank_steps " << rep.rank_steps << "\n"
              << "min/max/mean iters " << rep.min_iters << "/" << rep.max_iters << "/"
              << rep.mean_iters << "\n"
              << "max_cos " << rep.max_cos << "\n"
              << "achieved_rank " << rep.achieved_rank << "\n"
              << "rank_sequence [";
    for (size_t i = 0; i < rep.rank_sequence.size(); ++i)
      std::cout << (i ? "," : "") << rep.rank_sequence[i];
    std::cout << "]\nresidual " << rep.residual << "\n";
    if (!h_out.empty()) write_rank_report(h_out, kind, rep);
    return rep.converged ? 0 : kExitNotConverged;
  };
  if (maxrank->parsed()) return run_heuristic("maxrank");
  if (minrank->parsed()) return run_heuristic("minrank");
  if (rankscan->parsed()) return run_heuristic("rankscan");

  if (bench->parsed()) {
    std::ifstream in(grid_in);
    if (!in) throw std::runtime_error("cannot open " + grid_in);
    nlohmann::json grid;
    in >> grid;
    ReportWriter report(bench_out);
    SolverConfig base;
    if (grid.contains("config")) {
      base.toler = grid["config"].value("toler", base.toler);
      base.iterlimit = grid["config"].value("iterlimit", base.iterlimit);
    }
    std::vector<std::string> methods = {"dr"};
    if (grid.contains("methods")) methods = grid["methods"].get<std::vector<std::string>>();
    for (const auto& cell : grid.value("cells", nlohmann::json::array())) {
      GeneratorSpec cs;
      cs.n = cell.at("n").get<int>();
      cs.m = cell.value("m", cs.n);
      cs.k = cell.at("k").get<int>();
      cs.r = cell.at("r").get<int>();
      cs.seed = cell.value("seed", std::uint64_t(kDefaultSeed));
      cs.unital = cell.value("unital", true);
      for (const auto& method : methods) {
        ReportRow row;
        row.m = cs.m;
        row.n = cs.n;
        row.k = cs.k;
        row.r = cs.r;
        row.method = method;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          auto g = generate_feasible_instance(cs);
          const AffineOperator L = AffineOperator::assemble(g.instance);
          SolverConfig cfg = base;
          cfg.method = (method == "map") ? Method::MAP : Method::DR;
          const Eigen::Index D = L.side();
          const SolveTrace tr = solve(L, double(D) * Matrix::Identity(D, D), cfg);
          row.iters = tr.iterations;
          row.converged = tr.converged;
          row.residual = tr.final_residual;
          row.max_cos = tr.max_cos;
          row.rank = tr.final_rank;
          row.psd_seconds = tr.psd_projection_seconds;
          row.affine_seconds = tr.affine_projection_seconds;
        } catch (const std::exception& e) {
          std::cerr << "cell (" << cs.n << "," << cs.k << "," << cs.r << ") " << method
                    << " failed: " << e.what() << "\n";
          row.converged = false;
        }
        row.wall_seconds = wall_since(t0);
        report.write(row);
      }
    }
    std::cout << "wrote " << bench_out << "\n";
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const qchan::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
