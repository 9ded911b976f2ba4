#include "pnlab/lsfe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {

// 3-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 3> kGaussNodes{-0.77459666924148337704, 0.0, 0.77459666924148337704};
constexpr std::array<double, 3> kGaussWeights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

}  // namespace

Mesh1D Mesh1D::uniform(double a, double b, int elements) {
  if (elements < 1 || !(a < b)) throw Error(ErrorKind::InvalidArgument, "mesh needs >= 1 element and a < b");
  Mesh1D mesh;
  mesh.nodes.resize(elements + 1);
  for (int i = 0; i <= elements; ++i) mesh.nodes[i] = a + (b - a) * i / elements;
  mesh.nodes.back() = b;
  return mesh;
}

Mesh1D Mesh1D::for_problem(const SlabProblem& problem, int elements) {
  const auto& regions = problem.regions;
  if (elements < static_cast<int>(regions.size())) {
    throw Error(ErrorKind::InvalidArgument, "need at least one element per region");
  }
  const double x_l = problem.x_left();
  const double length = problem.length();
  Mesh1D mesh;
  mesh.nodes.push_back(x_l);
  int used = 0;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    int end = r + 1 == regions.size()
                  ? elements
                  : static_cast<int>(std::lround(elements * (regions[r].x_hi - x_l) / length));
    end = std::clamp(end, used + 1, elements - static_cast<int>(regions.size() - r - 1));
    const int count = end - used;
    for (int k = 1; k <= count; ++k) {
      mesh.nodes.push_back(k == count ? regions[r].x_hi
                                      : regions[r].x_lo + (regions[r].x_hi - regions[r].x_lo) * k / count);
    }
    used = end;
  }
  return mesh;
}

double& BandedSymmetricMatrix::at(Eigen::Index i, Eigen::Index j) {
  if (i < j) std::swap(i, j);
  if (i - j > kd_) throw Error(ErrorKind::ShapeMismatch, "entry outside the band");
  return band_(i - j, j);
}

double BandedSymmetricMatrix::operator()(Eigen::Index i, Eigen::Index j) const {
  if (i < j) std::swap(i, j);
  return i - j > kd_ ? 0.0 : band_(i - j, j);
}

Eigen::MatrixXd BandedSymmetricMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_, n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    for (Eigen::Index i = j; i <= std::min(n_ - 1, j + kd_); ++i) {
      d(i, j) = band_(i - j, j);
      d(j, i) = band_(i - j, j);
    }
  }
  return d;
}

Eigen::VectorXd BandedSymmetricMatrix::multiply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index j = 0; j < n_; ++j) {
    out(j) += band_(0, j) * v(j);
    for (Eigen::Index i = j + 1; i <= std::min(n_ - 1, j + kd_); ++i) {
      out(i) += band_(i - j, j) * v(j);
      out(j) += band_(i - j, j) * v(i);
    }
  }
  return out;
}

FemSystem assemble(const SlabProblem& problem, const Mesh1D& mesh, double boundary_weight,
                   const std::vector<int>& element_order) {
  const PnOperator op(problem);
  const int m = static_cast<int>(op.moments());
  const int ne = mesh.elements();
  if (ne < 1) throw Error(ErrorKind::InvalidArgument, "mesh has no elements");
  if (std::abs(mesh.nodes.front() - problem.x_left()) > 0 || std::abs(mesh.nodes.back() - problem.x_right()) > 0) {
    throw Error(ErrorKind::InvalidArgument, "mesh must span the slab exactly");
  }
  for (int e = 0; e < ne; ++e) {
    if (!(mesh.nodes[e] < mesh.nodes[e + 1])) throw Error(ErrorKind::InvalidArgument, "mesh nodes must increase");
    for (std::size_t r = 0; r + 1 < problem.regions.size(); ++r) {
      const double xi = problem.regions[r].x_hi;
      if (mesh.nodes[e] < xi && xi < mesh.nodes[e + 1]) {
        std::ostringstream msg;
        msg << "element [" << mesh.nodes[e] << ", " << mesh.nodes[e + 1] << "] straddles the interface at " << xi;
        throw Error(ErrorKind::InterfaceStraddle, msg.str());
      }
    }
  }

  std::vector<int> order = element_order;
  if (order.empty()) {
    order.resize(ne);
    std::iota(order.begin(), order.end(), 0);
  } else {
    std::vector<int> check = order;
    std::sort(check.begin(), check.end());
    for (int e = 0; e < ne; ++e) {
      if (static_cast<int>(check.size()) != ne || check[e] != e) {
        throw Error(ErrorKind::InvalidArgument, "element_order must be a permutation of the elements");
      }
    }
  }

  FemSystem sys;
  sys.moments = m;
  sys.mesh = mesh;
  const Eigen::Index ndof = static_cast<Eigen::Index>(m) * (ne + 1);
  sys.matrix = BandedSymmetricMatrix(ndof, 2 * m - 1);
  sys.rhs = Eigen::VectorXd::Zero(ndof);

  const Eigen::MatrixXd& a = op.streaming();
  Eigen::MatrixXd g(m, 2 * m);
  Eigen::MatrixXd ke(2 * m, 2 * m);
  Eigen::VectorXd be(2 * m);

  for (int e : order) {
    const double xa = mesh.nodes[e];
    const double xb = mesh.nodes[e + 1];
    const double h = xb - xa;
    const double xm = 0.5 * (xa + xb);
    // Coefficients are constant per element (no element straddles an interface).
    const Eigen::VectorXd c = op.collision_diag(xm);
    const Eigen::VectorXd s = op.row_scale(xm);
    ke.setZero();
    be.setZero();
    for (std::size_t qp = 0; qp < kGaussNodes.size(); ++qp) {
      const double xq = xm + 0.5 * h * kGaussNodes[qp];
      const double wq = 0.5 * h * kGaussWeights[qp];
      const double n0 = (xb - xq) / h;
      const double n1 = (xq - xa) / h;
      // Residual of the basis function (moment k, local node j) is column j*m + k.
      g.leftCols(m) = -a / h;
      g.rightCols(m) = a / h;
      g.leftCols(m).diagonal() += n0 * c;
      g.rightCols(m).diagonal() += n1 * c;
      g = s.asDiagonal() * g;
      ke.noalias() += wq * g.transpose() * g;
      // Source sits in row 0, which the row scaling leaves untouched.
      be += wq * op.source(xq) * g.row(0).transpose();
    }
    for (int i = 0; i < 2 * m; ++i) {
      const Eigen::Index gi = static_cast<Eigen::Index>(e) * m + i;
      sys.rhs(gi) += be(i);
      for (int j = 0; j <= i; ++j) sys.matrix.at(gi, static_cast<Eigen::Index>(e) * m + j) += ke(i, j);
    }
  }

  const std::array<std::pair<Side, BoundaryKind>, 2> sides{{{Side::Left, problem.bc_left}, {Side::Right, problem.bc_right}}};
  for (const auto& [side, kind] : sides) {
    const Eigen::MatrixXd b = boundary_rows(problem.order, kind, side);
    const Eigen::MatrixXd kb = boundary_weight * b.transpose() * b;
    const int node = side == Side::Left ? 0 : ne;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= i; ++j) sys.matrix.at(sys.dof(i, node), sys.dof(j, node)) += kb(i, j);
    }
  }
  return sys;
}

Eigen::VectorXd banded_lu_solve(const BandedSymmetricMatrix& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                                double* pivot_ratio) {
  const Eigen::Index n = a.size();
  const Eigen::Index kl = a.bandwidth();
  const Eigen::Index ku = a.bandwidth();
  const Eigen::Index width = 2 * kl + ku + 1;
  // Row i keeps columns [i - kl, i + kl + ku] at offsets 0..width-1.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, width);
  auto col = [&](Eigen::Index i, Eigen::Index j) { return j - i + kl; };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - kl); j <= std::min(n - 1, i + ku); ++j) w(i, col(i, j)) = a(i, j);
  }
  Eigen::VectorXd rhs = b;
  const double scale = std::max(a.band().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double min_pivot = std::numeric_limits<double>::infinity();
  double max_pivot = 0.0;

  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index last = std::min(n - 1, k + kl);
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i <= last; ++i) {
      if (std::abs(w(i, col(i, k))) > std::abs(w(p, col(p, k)))) p = i;
    }
    const double pivot = w(p, col(p, k));
    if (!(std::abs(pivot) > 1e-14 * scale)) {
      std::ostringstream msg;
      msg << "singular system: zero pivot at row " << k << " (|pivot|/max|A| = " << std::abs(pivot) / scale << ")";
      throw Error(ErrorKind::SingularSystem, msg.str());
    }
    const Eigen::Index jmax = std::min(n - 1, k + kl + ku);
    if (p != k) {
      for (Eigen::Index j = k; j <= jmax; ++j) std::swap(w(k, col(k, j)), w(p, col(p, j)));
      std::swap(rhs(k), rhs(p));
    }
    min_pivot = std::min(min_pivot, std::abs(pivot));
    max_pivot = std::max(max_pivot, std::abs(pivot));
    for (Eigen::Index i = k + 1; i <= last; ++i) {
      const double f = w(i, col(i, k)) / w(k, col(k, k));
      if (f == 0.0) continue;
      w(i, col(i, k)) = 0.0;
      for (Eigen::Index j = k + 1; j <= jmax; ++j) w(i, col(i, j)) -= f * w(k, col(k, j));
      rhs(i) -= f * rhs(k);
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double acc = rhs(i);
    for (Eigen::Index j = i + 1; j <= std::min(n - 1, i + kl + ku); ++j) acc -= w(i, col(i, j)) * x(j);
    x(i) = acc / w(i, col(i, i));
  }
  if (pivot_ratio) *pivot_ratio = min_pivot / max_pivot;
  return x;
}

SolveReport solve_banded(const BandedSymmetricMatrix& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::Index n = a.size();
  const Eigen::Index kd = a.bandwidth();
  if (b.size() != n) throw Error(ErrorKind::ShapeMismatch, "right-hand side length mismatch");

  SolveReport report;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(kd + 1, n);  // l(i - j, j) = L(i, j)
  bool ok = true;
  double min_pivot = std::numeric_limits<double>::infinity();
  double max_pivot = 0.0;
  for (Eigen::Index j = 0; j < n && ok; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = std::max<Eigen::Index>(0, j - kd); k < j; ++k) d -= l(j - k, k) * l(j - k, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      ok = false;
      break;
    }
    const double ljj = std::sqrt(d);
    l(0, j) = ljj;
    min_pivot = std::min(min_pivot, d);
    max_pivot = std::max(max_pivot, d);
    for (Eigen::Index i = j + 1; i <= std::min(n - 1, j + kd); ++i) {
      double v = a(i, j);
      for (Eigen::Index k = std::max<Eigen::Index>(0, i - kd); k < j; ++k) v -= l(i - k, k) * l(j - k, k);
      l(i - j, j) = v / ljj;
    }
  }

  if (ok) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = b(i);
      for (Eigen::Index k = std::max<Eigen::Index>(0, i - kd); k < i; ++k) acc -= l(i - k, k) * y(k);
      y(i) = acc / l(0, i);
    }
    Eigen::VectorXd x(n);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double acc = y(i);
      for (Eigen::Index k = i + 1; k <= std::min(n - 1, i + kd); ++k) acc -= l(k - i, i) * x(k);
      x(i) = acc / l(0, i);
    }
    report.coefficients = std::move(x);
    report.method = "cholesky";
    report.pivot_ratio = min_pivot / max_pivot;
  } else {
    report.coefficients = banded_lu_solve(a, b, &report.pivot_ratio);
    report.method = "lu";
  }
  const double bn = b.norm();
  const double rn = (a.multiply(report.coefficients) - b).norm();
  report.relative_residual = bn > 0.0 ? rn / bn : rn;
  if (!report.coefficients.allFinite()) throw Error(ErrorKind::NonFinite, "linear solve produced non-finite values");
  return report;
}

SolveReport solve(const FemSystem& system) { return solve_banded(system.matrix, system.rhs); }

FluxSolution evaluate(const Mesh1D& mesh, const Eigen::Ref<const Eigen::VectorXd>& coefficients, int moments,
                      const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const int ne = mesh.elements();
  if (coefficients.size() != static_cast<Eigen::Index>(moments) * (ne + 1)) {
    throw Error(ErrorKind::ShapeMismatch, "coefficient vector does not match mesh and moment count");
  }
  FluxSolution sol;
  sol.x = grid;
  sol.moments.resize(grid.size(), moments);
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double x = grid(g);
    if (!(x >= mesh.nodes.front() && x <= mesh.nodes.back())) {
      std::ostringstream msg;
      msg << "grid point " << x << " outside the mesh";
      throw Error(ErrorKind::OutOfDomain, msg.str());
    }
    int e = static_cast<int>(std::upper_bound(mesh.nodes.begin(), mesh.nodes.end(), x) - mesh.nodes.begin()) - 1;
    e = std::clamp(e, 0, ne - 1);
    const double t = (x - mesh.nodes[e]) / (mesh.nodes[e + 1] - mesh.nodes[e]);
    for (int n = 0; n < moments; ++n) {
      const double left = coefficients(static_cast<Eigen::Index>(e) * moments + n);
      const double right = coefficients(static_cast<Eigen::Index>(e + 1) * moments + n);
      sol.moments(g, n) = t == 0.0 ? left : (t == 1.0 ? right : (1.0 - t) * left + t * right);
    }
  }
  sol.metadata["solver"] = "lsfe";
  return sol;
}

void write_matrix_coordinates(const std::string& path, const BandedSymmetricMatrix& a) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    for (Eigen::Index i = j; i <= std::min(a.size() - 1, j + a.bandwidth()); ++i) {
      out << i << ' ' << j << ' ' << a(i, j) << '\n';
    }
  }
}

LsfeRun run_lsfe(const SlabProblem& problem, int elements, const Eigen::Ref<const Eigen::VectorXd>& grid,
                 double boundary_weight) {
  const Mesh1D mesh = Mesh1D::for_problem(problem, elements);
  const FemSystem sys = assemble(problem, mesh, boundary_weight);
  LsfeRun run;
  run.report = solve(sys);
  run.solution = evaluate(mesh, run.report.coefficients, sys.moments, grid);
  run.solution.metadata["scaling"] = problem.scaling == ScalingMode::Diffusive ? "diffusive" : "unscaled";
  run.solution.metadata["solve_method"] = run.report.method;
  std::ostringstream res;
  res << run.report.relative_residual;
  run.solution.metadata["relative_residual"] = res.str();
  return run;
}

}  // namespace pnlab
