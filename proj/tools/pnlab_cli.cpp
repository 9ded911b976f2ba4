#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pnlab/case_file.hpp"
#include "pnlab/error.hpp"
#include "pnlab/error_metric.hpp"
#include "pnlab/harness.hpp"
#include "pnlab/monte_carlo.hpp"
#include "pnlab/svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int fail(std::string_view kind, const std::string& message) {
  std::cerr << json{{"status", "error"}, {"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

pnlab::RunOptions options_from(std::optional<std::uint64_t> seed, const std::string& out) {
  pnlab::RunOptions opt;
  opt.output_root = out.empty() ? pnlab::output_root_from_env() : fs::path(out);
  opt.seed = seed;
  return opt;
}

json summary(const pnlab::CaseResult& r, const fs::path& dir) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"solver", pnlab::to_string(run.solver)},
                    {"scaling", pnlab::scaling_label(run.mode)},
                    {"xi_rel", run.error.xi_rel}});
  }
  return {{"status", "ok"}, {"output_dir", dir.string()}, {"runs", runs}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slab P_N transport laboratory: PINN and least-squares FE solvers with Monte Carlo references"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the PINN seeds (seed, seed+1, ...) and the MC seed");
    sub->add_option("--out", out, "Output root (default: $PNLAB_OUTPUT_DIR or ./pnlab_out)");
  };

  std::string case_path;
  std::optional<double> eps_override;
  auto* run = app.add_subcommand("run", "Run every solver of a case against its reference");
  run->add_option("case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  run->add_option("--eps", eps_override, "Override epsilon (asymptotic cases)");
  add_common(run);

  std::vector<double> eps_list;
  auto* sweep = app.add_subcommand("sweep", "Epsilon sweep producing an error table");
  sweep->add_option("case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--eps", eps_list, "Epsilon values, comma separated")->required()->delimiter(',');
  add_common(sweep);

  std::string sol_csv, ref_csv;
  int grid_points = 200;
  auto* err = app.add_subcommand("error", "Relative error of phi_0 between two CSV solutions");
  err->add_option("solution", sol_csv, "Solution CSV")->required()->check(CLI::ExistingFile);
  err->add_option("reference", ref_csv, "Reference CSV")->required()->check(CLI::ExistingFile);
  err->add_option("--grid", grid_points, "Number of equidistant comparison points");

  std::optional<long long> histories;
  auto* mc = app.add_subcommand("mc", "Monte Carlo reference for a case");
  mc->add_option("case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  mc->add_option("--histories", histories, "Number of histories");
  add_common(mc);

  std::vector<std::string> plot_inputs;
  std::string svg_path;
  std::string title = "phi_0";
  auto* plot = app.add_subcommand("plot", "Overlay phi_0 of CSV solutions as SVG");
  plot->add_option("inputs", plot_inputs, "Flux or tally CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", svg_path, "SVG path")->required();
  plot->add_option("--title", title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (*run) {
      const auto c = pnlab::load_case(case_path);
      auto opt = options_from(seed, out);
      opt.epsilon = eps_override;
      const auto result = pnlab::run_case(c, opt);
      std::cout << summary(result, opt.output_root / c.output_dir).dump(2) << '\n';
    } else if (*sweep) {
      const auto c = pnlab::load_case(case_path);
      const auto opt = options_from(seed, out);
      const auto rows = pnlab::sweep_epsilon(c, eps_list, opt);
      json table = json::array();
      for (const auto& r : rows) {
        table.push_back({{"epsilon", r.epsilon},
                         {"solver", pnlab::to_string(r.solver)},
                         {"scaling", pnlab::scaling_label(r.mode)},
                         {"xi_rel", r.xi_rel}});
      }
      std::cout << json{{"status", "ok"}, {"output_dir", (opt.output_root / c.output_dir / "sweep").string()}, {"rows", table}}.dump(2)
                << '\n';
    } else if (*err) {
      const auto sol = pnlab::read_flux_csv(sol_csv);
      const auto ref = pnlab::read_flux_csv(ref_csv);
      const double lo = std::max(sol.x.minCoeff(), ref.x.minCoeff());
      const double hi = std::min(sol.x.maxCoeff(), ref.x.maxCoeff());
      if (!(lo < hi)) throw pnlab::Error(pnlab::ErrorKind::InvalidArgument, "solutions do not overlap in x");
      auto report = pnlab::compute_error(sol, ref, pnlab::equidistant_grid(lo, hi, grid_points));
      report.solver = sol_csv;
      report.reference = ref_csv;
      json j = pnlab::to_json(report);
      j.erase("per_point");
      std::cout << j.dump(2) << '\n';
    } else if (*mc) {
      auto c = pnlab::load_case(case_path);
      if (histories) c.mc.histories = *histories;
      if (seed) c.mc.seed = *seed;
      const auto opt = options_from(seed, out);
      const auto dir = opt.output_root / c.output_dir;
      fs::create_directories(dir);
      const auto problem = c.problem.to_physical();
      auto cfg = c.mc;
      const auto edges = pnlab::equidistant_grid(problem.x_left(), problem.x_right(), c.mc_cells + 1);
      cfg.tally_grid.assign(edges.begin(), edges.end());
      const auto start = std::chrono::steady_clock::now();
      const auto tally = pnlab::mc_simulate(problem, cfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      pnlab::write_tally_csv(dir / "mc_tally.csv", tally);
      const json manifest{{"seed", cfg.seed},
                          {"histories", cfg.histories},
                          {"weight_cutoff", cfg.weight_cutoff},
                          {"cells", c.mc_cells},
                          {"absorbed", tally.absorbed},
                          {"leaked", tally.leaked},
                          {"balance", tally.balance},
                          {"balance_stderr", tally.balance_stderr},
                          {"collisions", tally.collisions},
                          {"wall_seconds", secs}};
      std::ofstream(dir / "mc_manifest.json") << manifest.dump(2) << '\n';
      std::cout << json{{"status", "ok"}, {"tally", (dir / "mc_tally.csv").string()}, {"manifest", manifest}}.dump(2)
                << '\n';
    } else if (*plot) {
      std::vector<pnlab::PlotSeries> series;
      for (const auto& p : plot_inputs) {
        const auto s = pnlab::read_flux_csv(p);
        series.push_back({fs::path(p).stem().string(), s.x, s.moments.col(0), s.phi0_stderr.has_value()});
      }
      pnlab::write_svg(svg_path, series, title);
      std::cout << json{{"status", "ok"}, {"svg", svg_path}}.dump() << '\n';
    }
  } catch (const pnlab::Error& e) {
    return fail(pnlab::to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
