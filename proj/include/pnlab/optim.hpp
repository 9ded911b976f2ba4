#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string_view>

#include <Eigen/Dense>

#include "pnlab/error.hpp"

namespace pnlab {

template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector first_moment;
  Vector second_moment;
  long step = 0;
  Scalar learning_rate = Scalar(2.5e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  AdamState() = default;
  AdamState(Eigen::Index size, Scalar lr) : first_moment(Vector::Zero(size)), second_moment(Vector::Zero(size)), learning_rate(lr) {}
};

/// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grad) {
  if (params.size() != grad.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "Adam state, parameters and gradient must have the same length");
  }
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (Scalar(1) - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment + (Scalar(1) - state.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step));
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 1000;
  double gradient_tolerance = 1e-10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 30;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed, NonFinite, Stopped };

std::string_view to_string(LbfgsStatus status);

template <typename Scalar>
struct LbfgsResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> params;
  Scalar loss = 0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), clamped
// into the safeguarded interior of [a, b].
template <typename Scalar>
Scalar cubic_minimizer(Scalar a, Scalar fa, Scalar ga, Scalar b, Scalar fb, Scalar gb) {
  const Scalar lo = std::min(a, b);
  const Scalar hi = std::max(a, b);
  const Scalar d1 = ga + gb - 3 * (fa - fb) / (a - b);
  const Scalar disc = d1 * d1 - ga * gb;
  Scalar t = (a + b) / 2;
  if (disc >= 0) {
    const Scalar d2 = std::copysign(std::sqrt(disc), b - a);
    const Scalar denom = gb - ga + 2 * d2;
    if (denom != 0) t = b - (b - a) * (gb + d2 - d1) / denom;
  }
  const Scalar margin = Scalar(0.1) * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = (a + b) / 2;
  return t;
}

}  // namespace detail

/// L-BFGS with the two-loop recursion and a strong-Wolfe line search
/// (bracketing followed by cubic-interpolation zoom).
///
/// `fg(x, g)` returns f(x) and writes the gradient into g. `on_iteration`
/// (optional) sees (iteration, loss, x) after every accepted step and may
/// return false to stop early. A line-search failure does not throw: the best
/// point so far is returned with status LineSearchFailed.
template <typename Scalar, typename Fg>
LbfgsResult<Scalar> lbfgs_minimize(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& initial, Fg&& fg, const LbfgsOptions& options,
    const std::function<bool(int, Scalar, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>& on_iteration = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (options.memory < 1) throw Error(ErrorKind::InvalidArgument, "L-BFGS memory must be >= 1");

  LbfgsResult<Scalar> result;
  Vector x = initial;
  Vector g(x.size());
  Scalar f = fg(x, g);
  result.evaluations = 1;
  result.params = x;
  result.loss = f;
  if (!std::isfinite(f) || !g.allFinite()) {
    result.status = LbfgsStatus::NonFinite;
    return result;
  }

  std::deque<Vector> s_hist;
  std::deque<Vector> y_hist;
  std::deque<Scalar> rho_hist;
  std::vector<Scalar> alpha_buf(options.memory);

  Vector d(x.size());
  Vector x_trial(x.size());
  Vector g_trial(x.size());

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (g.norm() <= options.gradient_tolerance) {
      result.status = LbfgsStatus::Converged;
      return result;
    }

    // Two-loop recursion: d = -H g.
    d = -g;
    const int k = static_cast<int>(s_hist.size());
    for (int i = k - 1; i >= 0; --i) {
      alpha_buf[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha_buf[i] * y_hist[i];
    }
    if (k > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (int i = 0; i < k; ++i) {
      const Scalar beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha_buf[i] - beta) * s_hist[i];
    }

    Scalar dg0 = g.dot(d);
    if (!(dg0 < 0)) {
      // Not a descent direction: restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      dg0 = g.dot(d);
    }

    // Strong-Wolfe line search.
    const Scalar f0 = f;
    Scalar step = k == 0 ? std::min(Scalar(1), Scalar(1) / std::max(g.template lpNorm<Eigen::Infinity>(), Scalar(1e-12)))
                         : Scalar(1);
    Scalar prev_step = 0;
    Scalar f_prev = f0;
    Scalar dg_prev = dg0;
    bool found = false;
    Scalar f_new = f0;
    int evals = 0;

    auto evaluate = [&](Scalar a) {
      x_trial = x + a * d;
      f_new = fg(x_trial, g_trial);
      ++evals;
      ++result.evaluations;
      return g_trial.dot(d);
    };

    auto zoom = [&](Scalar lo, Scalar f_lo, Scalar dg_lo, Scalar hi, Scalar f_hi, Scalar dg_hi) {
      while (evals < options.max_line_search) {
        const Scalar a = detail::cubic_minimizer(lo, f_lo, dg_lo, hi, f_hi, dg_hi);
        const Scalar dga = evaluate(a);
        if (!std::isfinite(f_new)) {
          hi = a;
          f_hi = std::numeric_limits<Scalar>::max();
          dg_hi = 0;
          continue;
        }
        if (f_new > f0 + options.c1 * a * dg0 || f_new >= f_lo) {
          hi = a;
          f_hi = f_new;
          dg_hi = dga;
        } else {
          if (std::abs(dga) <= -options.c2 * dg0) return true;
          if (dga * (hi - lo) >= 0) {
            hi = lo;
            f_hi = f_lo;
            dg_hi = dg_lo;
          }
          lo = a;
          f_lo = f_new;
          dg_lo = dga;
        }
        if (std::abs(hi - lo) <= std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), std::abs(lo))) break;
      }
      // Fall back to the best bracketing point if it still decreases f.
      if (lo > 0 && f_lo < f0) {
        evaluate(lo);
        return std::isfinite(f_new) && f_new < f0;
      }
      return false;
    };

    while (evals < options.max_line_search) {
      const Scalar dga = evaluate(step);
      if (!std::isfinite(f_new) || f_new > f0 + options.c1 * step * dg0 || (evals > 1 && f_new >= f_prev)) {
        const Scalar f_hi = std::isfinite(f_new) ? f_new : std::numeric_limits<Scalar>::max();
        found = zoom(prev_step, f_prev, dg_prev, step, f_hi, std::isfinite(f_new) ? dga : Scalar(0));
        break;
      }
      if (std::abs(dga) <= -options.c2 * dg0) {
        found = true;
        break;
      }
      if (dga >= 0) {
        found = zoom(step, f_new, dga, prev_step, f_prev, dg_prev);
        break;
      }
      prev_step = step;
      f_prev = f_new;
      dg_prev = dga;
      step *= 2;
    }

    if (!found) {
      result.status = LbfgsStatus::LineSearchFailed;
      result.iterations = iter;
      return result;
    }

    Vector s = x_trial - x;
    Vector y = g_trial - g;
    x = x_trial;
    g = g_trial;
    f = f_new;
    result.params = x;
    result.loss = f;
    result.iterations = iter + 1;

    const Scalar sy = s.dot(y);
    if (sy > std::numeric_limits<Scalar>::epsilon() * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(Scalar(1) / sy);
    }

    if (on_iteration && !on_iteration(result.iterations, f, x)) {
      result.status = LbfgsStatus::Stopped;
      return result;
    }
  }
  result.status = g.norm() <= options.gradient_tolerance ? LbfgsStatus::Converged : LbfgsStatus::MaxIterations;
  return result;
}

}  // namespace pnlab
