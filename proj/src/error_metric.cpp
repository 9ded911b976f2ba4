#include "pnlab/error_metric.hpp"

#include <cmath>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {
std::string label(const FluxSolution& s, const char* fallback) {
  auto it = s.metadata.find("solver");
  return it == s.metadata.end() ? fallback : it->second;
}
}  // namespace

ErrorReport compute_error(const FluxSolution& solution, const FluxSolution& reference,
                          const Eigen::Ref<const Eigen::VectorXd>& grid) {
  if (grid.size() < 1) throw Error(ErrorKind::InvalidArgument, "error grid is empty");
  const Eigen::VectorXd sol = solution.phi0_on(grid);
  const Eigen::VectorXd ref = reference.phi0_on(grid);
  if (!sol.allFinite() || !ref.allFinite()) throw Error(ErrorKind::NonFinite, "solution or reference is not finite");
  const double ref_norm2 = ref.squaredNorm();
  if (ref_norm2 == 0.0) throw Error(ErrorKind::UndefinedError, "reference is identically zero on the grid");

  ErrorReport report;
  report.grid_size = grid.size();
  report.solver = label(solution, "solution");
  report.reference = label(reference, "reference");
  report.xi_rel = std::sqrt((sol - ref).squaredNorm() / ref_norm2);
  report.per_point = Eigen::VectorXd::Zero(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    if (ref(g) == 0.0) {
      ++report.excluded_points;
      continue;
    }
    const double r = (sol(g) - ref(g)) / ref(g);
    report.per_point(g) = r * r;
  }
  report.xi_rel_pointwise = report.per_point.sum();
  return report;
}

nlohmann::json to_json(const ErrorReport& report) {
  return {{"xi_rel", report.xi_rel},
          {"xi_rel_percent", std::round(report.xi_rel * 1000.0) / 10.0},
          {"xi_rel_pointwise", report.xi_rel_pointwise},
          {"grid_size", report.grid_size},
          {"excluded_points", report.excluded_points},
          {"solver", report.solver},
          {"reference", report.reference},
          {"per_point", std::vector<double>(report.per_point.begin(), report.per_point.end())}};
}

}  // namespace pnlab
