#include "pnlab/pn_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {

// Exact rational for the half-range Legendre integrals. The values involved
// stay far below 2^62 for any order the solvers use (N <= 21).
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(__int128 n, __int128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a == 0) a = 1;
    return Rational{static_cast<std::int64_t>(n / a), static_cast<std::int64_t>(d / a)};
  }

  friend Rational operator*(Rational x, Rational y) {
    return make(static_cast<__int128>(x.num) * y.num, static_cast<__int128>(x.den) * y.den);
  }
  friend Rational operator-(Rational x, Rational y) {
    return make(static_cast<__int128>(x.num) * y.den - static_cast<__int128>(y.num) * x.den,
                static_cast<__int128>(x.den) * y.den);
  }
  friend Rational operator/(Rational x, std::int64_t k) { return make(x.num, static_cast<__int128>(x.den) * k); }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// P_n(0) via P_n(0) = -(n-1)/n P_{n-2}(0).
Rational legendre_at_zero(int n) {
  if (n % 2 == 1) return Rational{0, 1};
  Rational p{1, 1};
  for (int k = 2; k <= n; k += 2) p = p * Rational::make(-(k - 1), k);
  return p;
}

// P_n'(0) = n P_{n-1}(0).
Rational legendre_slope_at_zero(int n) {
  if (n == 0) return Rational{0, 1};
  return legendre_at_zero(n - 1) * Rational{n, 1};
}

}  // namespace

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial::integral(double a, double b) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double p = static_cast<double>(k + 1);
    acc += coeffs[k] * (std::pow(b, p) - std::pow(a, p)) / p;
  }
  return acc;
}

namespace {
std::vector<double> extremum_candidates(const Polynomial& q, double a, double b) {
  std::vector<double> xs{a, b};
  if (q.degree() == 2 && q.coeffs[2] != 0.0) {
    const double v = -q.coeffs[1] / (2.0 * q.coeffs[2]);
    if (v > a && v < b) xs.push_back(v);
  }
  return xs;
}
}  // namespace

double Polynomial::max_on(double a, double b) const {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : extremum_candidates(*this, a, b)) m = std::max(m, (*this)(x));
  return m;
}

double Polynomial::min_on(double a, double b) const {
  double m = std::numeric_limits<double>::infinity();
  for (double x : extremum_candidates(*this, a, b)) m = std::min(m, (*this)(x));
  return m;
}

bool is_valid_order(int order) { return order >= 1 && order % 2 == 1; }

void require_valid_order(int order) {
  if (!is_valid_order(order)) {
    throw Error(ErrorKind::InvalidOrder, "P_N order must be odd and >= 1, got " + std::to_string(order));
  }
}

void SlabProblem::validate() const {
  require_valid_order(order);
  if (regions.empty()) throw Error(ErrorKind::InvalidArgument, "slab problem has no regions");
  if (eps) {
    if (!(eps->epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
    if (!(eps->alpha >= 0.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be nonnegative");
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    std::ostringstream where;
    where << "region " << i << ": ";
    if (!(r.x_lo < r.x_hi)) throw Error(ErrorKind::InvalidArgument, where.str() + "x_lo must be < x_hi");
    if (i > 0 && r.x_lo != regions[i - 1].x_hi) {
      throw Error(ErrorKind::InvalidArgument, where.str() + "regions must tile the slab contiguously");
    }
    if (!eps) {
      if (!(r.sigma_t > 0.0)) throw Error(ErrorKind::InvalidArgument, where.str() + "sigma_t must be positive");
      if (!(r.sigma_a >= 0.0 && r.sigma_a <= r.sigma_t)) {
        throw Error(ErrorKind::InvalidArgument, where.str() + "need 0 <= sigma_a <= sigma_t");
      }
    }
    if (r.q.degree() > 2) throw Error(ErrorKind::InvalidArgument, where.str() + "source degree must be <= 2");
    if (r.q.min_on(r.x_lo, r.x_hi) < 0.0) {
      throw Error(ErrorKind::InvalidArgument, where.str() + "source must be nonnegative");
    }
  }
}

std::size_t SlabProblem::region_index(double x) const {
  for (std::size_t i = 0; i + 1 < regions.size(); ++i) {
    if (x < regions[i].x_hi) return i;
  }
  return regions.size() - 1;
}

double SlabProblem::sigma_t(std::size_t region) const {
  return eps ? 1.0 / eps->epsilon : regions[region].sigma_t;
}

double SlabProblem::sigma_a(std::size_t region) const {
  return eps ? eps->alpha * eps->epsilon : regions[region].sigma_a;
}

double SlabProblem::source(double x) const {
  const double q = regions[region_index(x)].q(x);
  return eps ? eps->epsilon * q : q;
}

SlabProblem SlabProblem::to_physical() const {
  SlabProblem out = *this;
  out.eps.reset();
  for (std::size_t i = 0; i < out.regions.size(); ++i) {
    auto& r = out.regions[i];
    r.sigma_t = sigma_t(i);
    r.sigma_a = sigma_a(i);
    if (eps) {
      for (double& c : r.q.coeffs) c *= eps->epsilon;
    }
  }
  return out;
}

SlabProblem SlabProblem::with_scaling(ScalingMode mode) const {
  SlabProblem out = *this;
  out.scaling = mode;
  return out;
}

Eigen::MatrixXd streaming_matrix(int order) {
  require_valid_order(order);
  const int m = order + 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int n = 0; n < m; ++n) {
    if (n > 0) a(n, n - 1) = static_cast<double>(n) / (2 * n + 1);
    if (n + 1 < m) a(n, n + 1) = static_cast<double>(n + 1) / (2 * n + 1);
  }
  return a;
}

double half_range_legendre_product(int m, int n) {
  if (m == n) return 1.0 / (2 * m + 1);
  // Legendre's equation gives (m(m+1) - n(n+1)) int_0^1 P_m P_n
  //   = P_n(0) P_m'(0) - P_m(0) P_n'(0).
  const Rational top = legendre_at_zero(n) * legendre_slope_at_zero(m) -
                       legendre_at_zero(m) * legendre_slope_at_zero(n);
  const std::int64_t denom = static_cast<std::int64_t>(m) * (m + 1) - static_cast<std::int64_t>(n) * (n + 1);
  return (top / denom).value();
}

Eigen::MatrixXd marshak_matrix(int order, Side side) {
  require_valid_order(order);
  const int rows = (order + 1) / 2;
  Eigen::MatrixXd b(rows, order + 1);
  for (int m = 1; m <= rows; ++m) {
    for (int n = 0; n <= order; ++n) {
      const double sign = (side == Side::Right && n % 2 == 1) ? -1.0 : 1.0;
      b(m - 1, n) = sign * 0.5 * (2 * n + 1) * half_range_legendre_product(2 * m - 1, n);
    }
  }
  return b;
}

Eigen::MatrixXd reflective_rows(int order) {
  require_valid_order(order);
  const int rows = (order + 1) / 2;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(rows, order + 1);
  for (int k = 0; k < rows; ++k) r(k, 2 * k + 1) = 1.0;
  return r;
}

Eigen::MatrixXd boundary_rows(int order, BoundaryKind kind, Side side) {
  return kind == BoundaryKind::Vacuum ? marshak_matrix(order, side) : reflective_rows(order);
}

PnOperator::PnOperator(const SlabProblem& problem)
    : problem_(problem), order_(problem.order), streaming_(streaming_matrix(problem.order)) {
  problem_.validate();
  tau_.resize(problem_.regions.size(), 1.0);
  if (problem_.scaling == ScalingMode::Diffusive) {
    for (std::size_t i = 0; i < tau_.size(); ++i) {
      // Written as sqrt(alpha)*eps so the ε-form weight is exact.
      tau_[i] = problem_.eps ? std::sqrt(problem_.eps->alpha) * problem_.eps->epsilon
                             : std::sqrt(problem_.sigma_a(i) / problem_.sigma_t(i));
    }
  }
}

void PnOperator::require_inside(double x) const {
  if (!(x >= problem_.x_left() && x <= problem_.x_right())) {
    std::ostringstream msg;
    msg << "x = " << x << " outside slab [" << problem_.x_left() << ", " << problem_.x_right() << "]";
    throw Error(ErrorKind::OutOfDomain, msg.str());
  }
}

Eigen::VectorXd PnOperator::collision_diag(double x) const {
  require_inside(x);
  const std::size_t r = problem_.region_index(x);
  Eigen::VectorXd c = Eigen::VectorXd::Constant(moments(), problem_.sigma_t(r));
  c(0) = problem_.sigma_a(r);
  return c;
}

Eigen::VectorXd PnOperator::row_scale(double x) const {
  require_inside(x);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(moments(), tau_[problem_.region_index(x)]);
  s(0) = 1.0;
  return s;
}

double PnOperator::source(double x) const {
  require_inside(x);
  return problem_.source(x);
}

Eigen::VectorXd PnOperator::residual(const Eigen::Ref<const Eigen::VectorXd>& phi,
                                     const Eigen::Ref<const Eigen::VectorXd>& dphi_dx, double x) const {
  if (phi.size() != moments() || dphi_dx.size() != moments()) {
    throw Error(ErrorKind::ShapeMismatch, "moment vector length must be N+1");
  }
  Eigen::VectorXd r = streaming_ * dphi_dx + collision_diag(x).cwiseProduct(phi);
  r(0) -= source(x);
  return row_scale(x).cwiseProduct(r);
}

double analytic_diffusion_reference(double x) { return -1.5 * x * x + 15.0 * x; }

double manufactured_source(double x, double alpha) { return 1.0 + alpha * analytic_diffusion_reference(x); }

SlabProblem asymptotic_problem(double epsilon, double alpha, ScalingMode mode, int order) {
  SlabProblem p;
  MaterialRegion slab;
  slab.x_lo = 0.0;
  slab.x_hi = 10.0;
  // 1 + α(-1.5 x^2 + 15 x)
  slab.q = Polynomial{{1.0, 15.0 * alpha, -1.5 * alpha}};
  p.regions = {slab};
  p.order = order;
  p.bc_left = BoundaryKind::Vacuum;
  p.bc_right = BoundaryKind::Vacuum;
  p.scaling = mode;
  p.eps = EpsilonScaling{epsilon, alpha};
  p.validate();
  return p;
}

SlabProblem interface_problem(ScalingMode mode, int order) {
  SlabProblem p;
  p.regions = {
      MaterialRegion{0.0, 2.0, 2.0, 2.0, Polynomial::constant(1.0)},
      MaterialRegion{2.0, 10.0, 100.0, 1e-4, Polynomial::constant(0.0)},
  };
  p.order = order;
  p.bc_left = BoundaryKind::Reflective;
  p.bc_right = BoundaryKind::Vacuum;
  p.scaling = mode;
  p.validate();
  return p;
}

}  // namespace pnlab
