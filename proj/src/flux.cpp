#include "pnlab/flux.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "pnlab/error.hpp"

namespace pnlab {

double FluxSolution::phi0_at(double xq) const {
  const Eigen::Index n = x.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty flux solution");
  if (n == 1) return moments(0, 0);
  const double* begin = x.data();
  Eigen::Index hi = std::upper_bound(begin, begin + n, xq) - begin;
  hi = std::clamp<Eigen::Index>(hi, 1, n - 1);
  const Eigen::Index lo = hi - 1;
  const double t = (xq - x(lo)) / (x(hi) - x(lo));
  return (1.0 - t) * moments(lo, 0) + t * moments(hi, 0);
}

Eigen::VectorXd FluxSolution::phi0_on(const Eigen::Ref<const Eigen::VectorXd>& grid) const {
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) out(i) = phi0_at(grid(i));
  return out;
}

Eigen::VectorXd equidistant_grid(double a, double b, int count) {
  if (count < 2 || !(a < b)) throw Error(ErrorKind::InvalidArgument, "grid needs count >= 2 and a < b");
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(count, a, b);
  g(count - 1) = b;
  return g;
}

void write_flux_csv(const std::filesystem::path& path, const FluxSolution& solution) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "x";
  for (int n = 0; n < solution.num_moments(); ++n) out << ",phi_" << n;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < solution.size(); ++i) {
    out << solution.x(i);
    for (int n = 0; n < solution.num_moments(); ++n) out << ',' << solution.moments(i, n);
    out << '\n';
  }
}

FluxSolution read_flux_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, path.string() + ": empty CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || (header[0] != "x" && header[0] != "x_center")) {
    throw Error(ErrorKind::Parse, path.string() + ": expected header x,phi_0,...");
  }
  const std::size_t cols = header.size();
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != cols) {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    rows.push_back(std::move(row));
  }
  FluxSolution sol;
  const auto n = static_cast<Eigen::Index>(rows.size());
  sol.x.resize(n);
  // A tally file carries x_center,phi0,stderr; everything else is moments.
  const bool tally = cols == 3 && header[2] == "stderr";
  const Eigen::Index m = tally ? 1 : static_cast<Eigen::Index>(cols - 1);
  sol.moments.resize(n, m);
  if (tally) sol.phi0_stderr = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sol.x(i) = rows[i][0];
    for (Eigen::Index j = 0; j < m; ++j) sol.moments(i, j) = rows[i][j + 1];
    if (tally) (*sol.phi0_stderr)(i) = rows[i][2];
  }
  if (!std::is_sorted(sol.x.data(), sol.x.data() + n)) {
    throw Error(ErrorKind::Parse, path.string() + ": x column must be increasing");
  }
  return sol;
}

}  // namespace pnlab
