#include "pnlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <thread>

#include "pnlab/checkpoint.hpp"
#include "pnlab/error.hpp"
#include "pnlab/lsfe.hpp"
#include "pnlab/monte_carlo.hpp"
#include "pnlab/pinn.hpp"
#include "pnlab/svg_plot.hpp"

namespace pnlab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::string eps_label(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json problem_json(const SlabProblem& p) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : p.regions) {
    regions.push_back({{"x_lo", r.x_lo}, {"x_hi", r.x_hi}, {"sigma_t", r.sigma_t}, {"sigma_a", r.sigma_a}, {"q", r.q.coeffs}});
  }
  nlohmann::json j{{"regions", regions},
                   {"order", p.order},
                   {"bc_left", p.bc_left == BoundaryKind::Vacuum ? "vacuum" : "reflective"},
                   {"bc_right", p.bc_right == BoundaryKind::Vacuum ? "vacuum" : "reflective"},
                   {"scaling", scaling_label(p.scaling)}};
  if (p.eps) j["eps"] = {{"epsilon", p.eps->epsilon}, {"alpha", p.eps->alpha}};
  return j;
}

std::vector<ErrorReport> region_errors(const SlabProblem& problem, const FluxSolution& sol, const FluxSolution& ref,
                                       const Eigen::Ref<const Eigen::VectorXd>& grid) {
  std::vector<ErrorReport> out;
  if (problem.regions.size() < 2) return out;
  for (const auto& r : problem.regions) {
    std::vector<double> pts;
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      if (grid(g) >= r.x_lo && grid(g) <= r.x_hi) pts.push_back(grid(g));
    }
    if (pts.empty()) continue;
    const Eigen::Map<const Eigen::VectorXd> sub(pts.data(), static_cast<Eigen::Index>(pts.size()));
    try {
      out.push_back(compute_error(sol, ref, sub));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedError) throw;
    }
  }
  return out;
}

PinnConfig pinn_config(const CaseFile& c, const RunOptions& options) {
  PinnConfig cfg = c.pinn;
  if (options.seed) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = *options.seed + i;
  }
  return cfg;
}

constexpr int kMaxRetries = 2;
constexpr std::uint64_t kRetrySeedStride = 1000;

SolverRun run_pinn(const CaseFile& c, const SlabProblem& problem, const FluxSolution& reference,
                   const Eigen::Ref<const Eigen::VectorXd>& grid, const RunOptions& options) {
  const PinnConfig cfg = pinn_config(c, options);
  auto trained = train_ensemble(problem, cfg);
  nlohmann::json retries = nlohmann::json::array();
  for (auto& t : trained) {
    for (int attempt = 1; attempt <= kMaxRetries && t.status == TrainStatus::NonFinite; ++attempt) {
      const std::uint64_t fresh = t.seed + kRetrySeedStride * attempt;
      retries.push_back({{"failed_seed", t.seed}, {"retry_seed", fresh}});
      t = train(problem, cfg, fresh);
    }
  }
  SolverRun run;
  run.solver = SolverKind::Pinn;
  run.mode = problem.scaling;
  run.solution = ensemble_predict(trained, grid);
  for (const auto& t : trained) run.member_errors.push_back(compute_error(t.predict(grid), reference, grid));
  run.manifest = run_manifest(trained);
  run.manifest["retries"] = retries;
  for (std::size_t i = 0; i < trained.size(); ++i) {
    run.manifest["runs"][i]["xi_rel"] = run.member_errors[i].xi_rel;
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : trained[i].loss_history) history.push_back({h.step, h.interior, h.boundary});
    run.manifest["runs"][i]["loss_history"] = history;
  }
  if (!options.output_root.empty()) {
    const auto dir = options.output_root / c.output_dir;
    for (const auto& t : trained) {
      save_checkpoint(dir / ("pinn_" + scaling_label(problem.scaling) + "_seed" + std::to_string(t.seed) + ".json"),
                      t.network, t.seed);
    }
  }
  return run;
}

SolverRun run_lsfe_solver(const CaseFile& c, const SlabProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const auto result = run_lsfe(problem, c.lsfe.elements, grid, c.lsfe.boundary_weight);
  SolverRun run;
  run.solver = SolverKind::Lsfe;
  run.mode = problem.scaling;
  run.solution = result.solution;
  run.manifest = {{"elements", c.lsfe.elements},
                  {"boundary_weight", c.lsfe.boundary_weight},
                  {"unknowns", result.report.coefficients.size()},
                  {"method", result.report.method},
                  {"relative_residual", result.report.relative_residual}};
  return run;
}

}  // namespace

std::string scaling_label(ScalingMode mode) { return mode == ScalingMode::Diffusive ? "scaled" : "unscaled"; }

std::filesystem::path output_root_from_env() {
  const char* v = std::getenv("PNLAB_OUTPUT_DIR");
  return v != nullptr && *v != '\0' ? std::filesystem::path(v) : std::filesystem::path("pnlab_out");
}

FluxSolution reference_solution(const CaseFile& c, const SlabProblem& problem, Eigen::VectorXd& grid,
                                nlohmann::json& manifest) {
  if (c.reference == SolverKind::Analytic) {
    grid = equidistant_grid(problem.x_left(), problem.x_right(), c.grid_points);
    FluxSolution ref;
    ref.x = grid;
    ref.moments = grid.unaryExpr([](double x) { return analytic_diffusion_reference(x); });
    ref.metadata["solver"] = "analytic";
    manifest = {{"kind", "analytic"}, {"grid_points", c.grid_points}};
    return ref;
  }
  McConfig mc = c.mc;
  const Eigen::VectorXd edges = equidistant_grid(problem.x_left(), problem.x_right(), c.mc_cells + 1);
  mc.tally_grid.assign(edges.begin(), edges.end());
  const auto start = Clock::now();
  const McTally tally = mc_simulate(problem, mc);
  FluxSolution ref = mc_to_solution(tally);
  grid = ref.x;
  manifest = {{"kind", "mc"},
              {"seed", mc.seed},
              {"histories", mc.histories},
              {"weight_cutoff", mc.weight_cutoff},
              {"cells", c.mc_cells},
              {"collisions", tally.collisions},
              {"balance", tally.balance},
              {"balance_stderr", tally.balance_stderr},
              {"max_relative_stderr", (tally.stderr_flux.array() / tally.flux.array().max(1e-300)).maxCoeff()},
              {"wall_seconds", seconds_since(start)}};
  return ref;
}

SolverRun run_solver(const CaseFile& c, SolverKind solver, const SlabProblem& problem, const FluxSolution& reference,
                     const Eigen::Ref<const Eigen::VectorXd>& grid, const RunOptions& options) {
  const auto start = Clock::now();
  SolverRun run;
  switch (solver) {
    case SolverKind::Pinn: run = run_pinn(c, problem, reference, grid, options); break;
    case SolverKind::Lsfe: run = run_lsfe_solver(c, problem, grid); break;
    default: throw Error(ErrorKind::InvalidArgument, "solver '" + std::string(to_string(solver)) + "' cannot be run here");
  }
  run.solution.metadata["solver"] = std::string(to_string(solver));
  run.solution.metadata["scaling"] = scaling_label(problem.scaling);
  run.error = compute_error(run.solution, reference, grid);
  run.error.solver = std::string(to_string(solver)) + "_" + scaling_label(problem.scaling);
  run.region_errors = region_errors(problem, run.solution, reference, grid);
  run.manifest["wall_seconds"] = seconds_since(start);
  return run;
}

CaseResult run_case(const CaseFile& c, const RunOptions& options) {
  const auto start = Clock::now();
  CaseFile cf = c;
  if (options.seed) cf.mc.seed = *options.seed;
  const SlabProblem base = cf.problem_for(cf.problem.scaling, options.epsilon);

  CaseResult result;
  nlohmann::json ref_manifest;
  result.reference = reference_solution(cf, base.with_scaling(ScalingMode::Unscaled), result.grid, ref_manifest);
  result.manifest = {{"case", cf.name},
                     {"timestamp", timestamp()},
                     {"problem", problem_json(base)},
                     {"reference", ref_manifest},
                     {"pinn_config", to_json(pinn_config(cf, options))},
                     {"runs", nlohmann::json::array()}};
  if (options.seed) result.manifest["seed_override"] = *options.seed;

  std::filesystem::path dir;
  if (!options.output_root.empty()) {
    dir = options.output_root / cf.output_dir;
    std::filesystem::create_directories(dir);
    write_flux_csv(dir / ("reference_" + std::string(to_string(cf.reference)) + ".csv"), result.reference);
  }

  nlohmann::json errors = nlohmann::json::array();
  for (SolverKind solver : cf.solvers) {
    for (ScalingMode mode : cf.modes) {
      const SlabProblem problem = base.with_scaling(mode);
      SolverRun run;
      try {
        run = run_solver(cf, solver, problem, result.reference, result.grid, options);
      } catch (const Error& e) {
        result.manifest["failure"] = {{"solver", to_string(solver)},
                                      {"scaling", scaling_label(mode)},
                                      {"error", to_string(e.kind())},
                                      {"message", e.what()}};
        if (!dir.empty()) write_json(dir / "manifest.json", result.manifest);
        throw;
      }
      const std::string tag = std::string(to_string(solver)) + "_" + scaling_label(mode);
      nlohmann::json err = to_json(run.error);
      err.erase("per_point");
      nlohmann::json by_region = nlohmann::json::array();
      for (const auto& r : run.region_errors) by_region.push_back(r.xi_rel);
      err["xi_rel_by_region"] = by_region;
      if (!run.member_errors.empty()) {
        nlohmann::json members = nlohmann::json::array();
        for (const auto& m : run.member_errors) members.push_back(m.xi_rel);
        err["xi_rel_members"] = members;
      }
      errors.push_back(err);
      result.manifest["runs"].push_back({{"solver", to_string(solver)},
                                         {"scaling", scaling_label(mode)},
                                         {"xi_rel", run.error.xi_rel},
                                         {"details", run.manifest}});
      if (!dir.empty()) write_flux_csv(dir / (tag + ".csv"), run.solution);
      result.runs.push_back(std::move(run));
    }
  }
  result.manifest["wall_seconds"] = seconds_since(start);

  if (!dir.empty()) {
    write_json(dir / "errors.json", errors);
    write_json(dir / "manifest.json", result.manifest);
    std::vector<PlotSeries> series;
    for (const auto& r : result.runs) {
      series.push_back({std::string(to_string(r.solver)) + " " + scaling_label(r.mode), r.solution.x,
                        r.solution.moments.col(0), false});
    }
    series.push_back({std::string(to_string(cf.reference)) + " reference", result.reference.x,
                      result.reference.moments.col(0), cf.reference == SolverKind::Mc});
    write_svg(dir / "plot.svg", series, cf.name);
  }
  return result;
}

std::vector<SweepRow> sweep_epsilon(const CaseFile& c, const std::vector<double>& epsilons, const RunOptions& options) {
  if (!c.is_asymptotic()) throw Error(ErrorKind::InvalidArgument, "sweep needs an asymptotic case");
  if (epsilons.empty()) throw Error(ErrorKind::InvalidArgument, "epsilon list is empty");
  for (double e : epsilons) {
    if (!(e > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon values must be positive");
  }
  struct Cell {
    double eps;
    SolverKind solver;
    ScalingMode mode;
  };
  std::vector<Cell> cells;
  for (double e : epsilons) {
    for (SolverKind s : c.solvers) {
      for (ScalingMode m : c.modes) cells.push_back({e, s, m});
    }
  }

  int threads = c.pinn.threads > 0 ? c.pinn.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(cells.size()));
  CaseFile cf = c;
  if (threads > 1) cf.pinn.threads = 1;  // parallelism lives at the cell level
  cf.output_dir.clear();

  std::filesystem::path dir;
  if (!options.output_root.empty()) {
    dir = options.output_root / c.output_dir / "sweep";
    std::filesystem::create_directories(dir);
  }

  std::vector<SolverRun> runs(cells.size());
  std::vector<FluxSolution> refs(epsilons.size());
  std::vector<Eigen::VectorXd> grids(epsilons.size());
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    nlohmann::json ignored;
    refs[i] = reference_solution(cf, cf.problem_for(ScalingMode::Unscaled, epsilons[i]), grids[i], ignored);
  }
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const std::size_t e = i / (c.solvers.size() * c.modes.size());
      try {
        RunOptions cell_options = options;
        // checkpoints of each epsilon go to their own directory
        if (!dir.empty()) cell_options.output_root = dir / ("eps" + eps_label(cells[i].eps));
        runs[i] = run_solver(cf, cells[i].solver, cf.problem_for(cells[i].mode, cells[i].eps), refs[e], grids[e],
                             cell_options);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<SweepRow> rows;
  nlohmann::json manifest{{"case", c.name}, {"timestamp", timestamp()}, {"cells", nlohmann::json::array()}};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& r = runs[i];
    rows.push_back({cells[i].eps, cells[i].solver, cells[i].mode, r.error.xi_rel,
                    r.solution.moments.col(0).cwiseAbs().maxCoeff()});
    manifest["cells"].push_back({{"epsilon", cells[i].eps},
                                 {"solver", to_string(cells[i].solver)},
                                 {"scaling", scaling_label(cells[i].mode)},
                                 {"xi_rel", r.error.xi_rel},
                                 {"details", r.manifest}});
    if (!dir.empty()) {
      write_flux_csv(dir / (std::string(to_string(cells[i].solver)) + "_" + scaling_label(cells[i].mode) + "_eps" +
                            eps_label(cells[i].eps) + ".csv"),
                     r.solution);
    }
  }
  if (!dir.empty()) {
    write_sweep_csv(dir / "sweep.csv", rows);
    write_sweep_table(dir / "table.csv", rows);
    write_json(dir / "manifest.json", manifest);
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "epsilon,solver,scaling,xi_rel,xi_rel_percent,max_phi0\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.epsilon << ',' << to_string(r.solver) << ',' << scaling_label(r.mode) << ',' << r.xi_rel << ','
        << std::fixed << std::setprecision(1) << 100.0 * r.xi_rel << std::defaultfloat << std::setprecision(10) << ','
        << r.max_phi0 << '\n';
  }
}

void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::vector<double> eps;
  std::vector<std::pair<SolverKind, ScalingMode>> methods;
  for (const auto& r : rows) {
    if (std::find(eps.begin(), eps.end(), r.epsilon) == eps.end()) eps.push_back(r.epsilon);
    const auto m = std::make_pair(r.solver, r.mode);
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
  }
  out << "method";
  for (double e : eps) out << ",eps=" << eps_label(e);
  out << '\n';
  for (const auto& [solver, mode] : methods) {
    std::string name(to_string(solver));
    for (auto& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    out << name << ' ' << scaling_label(mode);
    for (double e : eps) {
      out << ',';
      for (const auto& r : rows) {
        if (r.epsilon == e && r.solver == solver && r.mode == mode) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * r.xi_rel);
          out << buf;
        }
      }
    }
    out << '\n';
  }
}

}  // namespace pnlab
