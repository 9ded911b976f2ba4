#include "pnlab/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <thread>

#include "pnlab/error.hpp"

namespace pnlab {

namespace {

constexpr int kMaxBatches = 64;

class HistoryRng {
 public:
  HistoryRng(std::uint64_t seed, std::uint64_t history) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(history), static_cast<std::uint32_t>(history >> 32)};
    engine_.seed(seq);
  }
  // Uniform on (0, 1].
  double open_uniform() { return 1.0 - std::generate_canonical<double, 53>(engine_); }
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

 private:
  std::mt19937_64 engine_;
};

struct BatchResult {
  Eigen::VectorXd sum;
  Eigen::VectorXd sum_sq;
  double absorbed = 0.0;
  double leaked = 0.0;
  double balance_sum = 0.0;
  double balance_sq = 0.0;
  std::int64_t collisions = 0;
};

class Walker {
 public:
  Walker(const SlabProblem& problem, const McConfig& config)
      : problem_(problem), config_(config), edges_(config.tally_grid) {
    const auto& regions = problem_.regions;
    region_weight_.reserve(regions.size());
    double total = 0.0;
    for (const auto& r : regions) {
      total += r.q.integral(r.x_lo, r.x_hi);
      region_weight_.push_back(total);
    }
    source_strength_ = total;
  }

  double source_strength() const { return source_strength_; }

  void run_batch(std::int64_t first, std::int64_t last, BatchResult& out) const {
    const auto cells = static_cast<Eigen::Index>(edges_.size() - 1);
    out.sum = Eigen::VectorXd::Zero(cells);
    out.sum_sq = Eigen::VectorXd::Zero(cells);
    Eigen::VectorXd score = Eigen::VectorXd::Zero(cells);
    std::vector<char> touched_flag(cells, 0);
    std::vector<Eigen::Index> touched;
    for (std::int64_t h = first; h < last; ++h) {
      HistoryRng rng(config_.seed, static_cast<std::uint64_t>(h));
      double absorbed = 0.0;
      double leaked = 0.0;
      run_history(rng, score, touched_flag, touched, absorbed, leaked, out.collisions);
      for (Eigen::Index c : touched) {
        out.sum(c) += score(c);
        out.sum_sq(c) += score(c) * score(c);
        score(c) = 0.0;
        touched_flag[c] = 0;
      }
      touched.clear();
      out.absorbed += absorbed;
      out.leaked += leaked;
      const double b = absorbed + leaked;
      out.balance_sum += b;
      out.balance_sq += b * b;
    }
  }

 private:
  double sample_position(HistoryRng& rng, std::size_t& region) const {
    const double pick = rng.uniform() * source_strength_;
    region = static_cast<std::size_t>(std::upper_bound(region_weight_.begin(), region_weight_.end(), pick) -
                                      region_weight_.begin());
    region = std::min(region, problem_.regions.size() - 1);
    while (problem_.regions[region].q.integral(problem_.regions[region].x_lo, problem_.regions[region].x_hi) <= 0.0) {
      --region;  // upper_bound never lands past the last positive region
    }
    const auto& r = problem_.regions[region];
    const double qmax = r.q.max_on(r.x_lo, r.x_hi);
    for (;;) {
      const double x = r.x_lo + (r.x_hi - r.x_lo) * rng.uniform();
      if (rng.uniform() * qmax <= r.q(x)) return x;
    }
  }

  // Adds weight * track length over [xa, xb] to the per-cell history score.
  void tally(double xa, double xb, double inv_abs_mu, double weight, Eigen::VectorXd& score,
             std::vector<char>& touched_flag, std::vector<Eigen::Index>& touched) const {
    if (xa > xb) std::swap(xa, xb);
    auto it = std::upper_bound(edges_.begin(), edges_.end(), xa);
    Eigen::Index c = std::clamp<Eigen::Index>(it - edges_.begin() - 1, 0, static_cast<Eigen::Index>(edges_.size()) - 2);
    const auto cells = static_cast<Eigen::Index>(edges_.size() - 1);
    for (; c < cells && edges_[c] < xb; ++c) {
      const double lo = std::max(xa, edges_[c]);
      const double hi = std::min(xb, edges_[c + 1]);
      if (hi <= lo) continue;
      score(c) += weight * (hi - lo) * inv_abs_mu;
      if (!touched_flag[c]) {
        touched_flag[c] = 1;
        touched.push_back(c);
      }
    }
  }

  void run_history(HistoryRng& rng, Eigen::VectorXd& score, std::vector<char>& touched_flag,
                   std::vector<Eigen::Index>& touched, double& absorbed, double& leaked,
                   std::int64_t& collisions) const {
    std::size_t region = 0;
    double x = sample_position(rng, region);
    double mu = 2.0 * rng.uniform() - 1.0;
    double weight = 1.0;
    const auto& regions = problem_.regions;
    const std::size_t last_region = regions.size() - 1;
    for (;;) {
      if (mu == 0.0) mu = 2.0 * rng.uniform() - 1.0;
      const auto& r = regions[region];
      const double to_boundary = mu > 0.0 ? (r.x_hi - x) / mu : (x - r.x_lo) / -mu;
      const double flight = -std::log(rng.open_uniform()) / r.sigma_t;
      const double inv_abs_mu = 1.0 / std::abs(mu);
      if (flight < to_boundary) {
        const double x_new = x + flight * mu;
        tally(x, x_new, inv_abs_mu, weight, score, touched_flag, touched);
        x = x_new;
        ++collisions;
        if (config_.implicit_capture) {
          absorbed += weight * r.sigma_a / r.sigma_t;
          weight *= (r.sigma_t - r.sigma_a) / r.sigma_t;
          if (weight <= 0.0) return;
          if (weight < config_.weight_cutoff) {
            if (rng.uniform() < 0.5) {
              weight *= 2.0;
            } else {
              return;
            }
          }
        } else if (rng.uniform() * r.sigma_t < r.sigma_a) {
          absorbed += weight;
          return;
        }
        mu = 2.0 * rng.uniform() - 1.0;
        continue;
      }
      const double x_face = mu > 0.0 ? r.x_hi : r.x_lo;
      tally(x, x_face, inv_abs_mu, weight, score, touched_flag, touched);
      x = x_face;
      if (mu > 0.0 && region < last_region) {
        ++region;
      } else if (mu < 0.0 && region > 0) {
        --region;
      } else {
        const BoundaryKind kind = mu > 0.0 ? problem_.bc_right : problem_.bc_left;
        if (kind == BoundaryKind::Vacuum) {
          leaked += weight;
          return;
        }
        mu = -mu;
      }
    }
  }

  const SlabProblem& problem_;
  const McConfig& config_;
  std::vector<double> edges_;
  std::vector<double> region_weight_;
  double source_strength_ = 0.0;
};

}  // namespace

Eigen::VectorXd McTally::centers() const {
  Eigen::VectorXd c(static_cast<Eigen::Index>(edges.size()) - 1);
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = 0.5 * (edges[i] + edges[i + 1]);
  return c;
}

McTally mc_simulate(const SlabProblem& input, const McConfig& config) {
  input.validate();
  const SlabProblem problem = input.to_physical();
  if (config.histories < 1) throw Error(ErrorKind::InvalidArgument, "need at least one history");
  if (!(config.weight_cutoff > 0.0 && config.weight_cutoff < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "weight cutoff must lie in (0, 1)");
  }
  const auto& grid = config.tally_grid;
  if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw Error(ErrorKind::InvalidArgument, "tally grid must have >= 2 strictly increasing edges");
  }
  if (grid.front() != problem.x_left() || grid.back() != problem.x_right()) {
    throw Error(ErrorKind::InvalidArgument, "tally grid must span the slab");
  }

  const Walker walker(problem, config);
  if (!(walker.source_strength() > 0.0)) throw Error(ErrorKind::ZeroSource, "total source strength is zero");

  const std::int64_t n = config.histories;
  const int batches = static_cast<int>(std::min<std::int64_t>(kMaxBatches, n));
  std::vector<BatchResult> results(batches);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int b = next++; b < batches; b = next++) {
      walker.run_batch(n * b / batches, n * (b + 1) / batches, results[b]);
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, batches);
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }

  const auto cells = static_cast<Eigen::Index>(grid.size() - 1);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(cells);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(cells);
  McTally tally;
  double balance_sum = 0.0;
  double balance_sq = 0.0;
  for (const auto& r : results) {
    sum += r.sum;
    sum_sq += r.sum_sq;
    tally.absorbed += r.absorbed;
    tally.leaked += r.leaked;
    balance_sum += r.balance_sum;
    balance_sq += r.balance_sq;
    tally.collisions += r.collisions;
  }
  const double nd = static_cast<double>(n);
  tally.edges = grid;
  tally.histories = n;
  tally.source_strength = walker.source_strength();
  Eigen::VectorXd width(cells);
  for (Eigen::Index c = 0; c < cells; ++c) width(c) = grid[c + 1] - grid[c];
  const Eigen::VectorXd mean = sum / nd;
  const Eigen::VectorXd var =
      n > 1 ? Eigen::VectorXd(((sum_sq / nd - mean.cwiseAbs2()) * nd / (nd - 1.0)).cwiseMax(0.0)) : Eigen::VectorXd::Zero(cells);
  const double norm = tally.source_strength;
  tally.flux = norm * mean.cwiseQuotient(width);
  tally.stderr_flux = norm * (var / nd).cwiseSqrt().cwiseQuotient(width);
  tally.absorbed /= nd;
  tally.leaked /= nd;
  tally.balance = balance_sum / nd;
  const double bvar = n > 1 ? std::max(0.0, (balance_sq / nd - tally.balance * tally.balance) * nd / (nd - 1.0)) : 0.0;
  tally.balance_stderr = std::sqrt(bvar / nd);
  if (!tally.flux.allFinite() || !tally.stderr_flux.allFinite()) {
    throw Error(ErrorKind::NonFinite, "Monte Carlo tally is not finite (collisions: " +
                                          std::to_string(tally.collisions) + ")");
  }
  return tally;
}

FluxSolution mc_to_solution(const McTally& tally) {
  FluxSolution sol;
  sol.x = tally.centers();
  sol.moments = tally.flux;
  sol.phi0_stderr = tally.stderr_flux;
  sol.metadata["solver"] = "mc";
  sol.metadata["histories"] = std::to_string(tally.histories);
  return sol;
}

FluxSolution mc_to_solution(const McTally& tally, const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const Eigen::VectorXd centers = tally.centers();
  if (grid.size() != centers.size() || !grid.isApprox(centers, 1e-12)) {
    throw Error(ErrorKind::ShapeMismatch, "grid does not match the tally cell centers");
  }
  return mc_to_solution(tally);
}

void write_tally_csv(const std::filesystem::path& path, const McTally& tally) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "x_center,phi0,stderr\n" << std::setprecision(17);
  const Eigen::VectorXd c = tally.centers();
  for (Eigen::Index i = 0; i < c.size(); ++i) out << c(i) << ',' << tally.flux(i) << ',' << tally.stderr_flux(i) << '\n';
}

}  // namespace pnlab
