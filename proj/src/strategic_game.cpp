#include "reco/strategic_game.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace reco {

namespace {

constexpr double kQuadratureTolerance = 1e-10;
constexpr double kTerminalMatch = 1e-9;
constexpr double kIntervalSlack = 1e-15;

// Adaptive Gauss–Kronrod with an absolute error target of kQuadratureTolerance
// per unit length. Boost supplies the single-panel rule and its error estimate.
template <class F>
double integrate_panel(F& f, double a, double b, double tol, int depth) {
  double error = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, /*max_depth=*/0, /*tolerance=*/0.0, &error);
  // Boost reports the panel error on the reference interval [−1, 1].
  error *= 0.5 * (b - a);
  if (error <= tol) return v;
  if (depth == 0) throw DomainError("adaptive quadrature did not reach the requested tolerance");
  const double mid = a + 0.5 * (b - a);
  return integrate_panel(f, a, mid, 0.5 * tol, depth - 1) +
         integrate_panel(f, mid, b, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return integrate_panel(f, a, b, std::max(kQuadratureTolerance * (b - a), 1e-300), 30);
}

// χ(t) = (t − log1p t)/t², with its series near 0.
double chi(double t) {
  if (std::abs(t) < 1e-2) {
    double term = 1.0, sum = 0.0;
    for (int k = 0; k < 8; ++k) {
      sum += term / (k + 2);
      term *= -t;
    }
    return sum;
  }
  return (t - std::log1p(t)) / (t * t);
}

void check_interval(double lo, double hi, const BiasGame& game) {
  if (!(lo >= game.c() - kIntervalSlack && hi <= game.d() + kIntervalSlack && lo <= hi)) {
    throw DomainError("interval [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] is not inside [c, d]");
  }
}

// Integrates f·μ and μ over [lo, hi], splitting at the prior's pieces.
template <class F>
std::pair<double, double> weighted_integrals(F&& f, double lo, double hi, const Prior& prior) {
  double num = 0.0, den = 0.0;
  const auto& e = prior.edges();
  for (std::size_t k = 0; k + 1 < e.size(); ++k) {
    const double a = std::max(lo, e[k]);
    const double b = std::min(hi, e[k + 1]);
    if (!(b > a)) continue;
    const double rho = prior.is_uniform() ? 1.0 : prior.densities()[k];
    num += rho * integrate(f, a, b);
    den += integrate([rho](double) { return rho; }, a, b);
  }
  return {num, den};
}

bool aligned_uniform(const BiasGame& game) { return game.b() == 0.0 && game.prior().is_uniform(); }

enum class ShotStatus { Feasible, Undershoot, Overshoot };

struct Shot {
  ShotStatus status = ShotStatus::Feasible;
  std::vector<double> breakpoints;
};

// Runs the arbitrage recursion from (c, a1) for n − 1 steps.
Shot shoot(double a1, int n, const BiasGame& game) {
  Shot s;
  s.breakpoints = {game.c(), a1};
  double ybar = conditional_action(game.c(), a1, game);
  for (int k = 1; k < n; ++k) {
    const double a_prev = s.breakpoints[static_cast<std::size_t>(k - 1)];
    const double a_cur = s.breakpoints[static_cast<std::size_t>(k)];
    try {
      const double next = forward_step(a_prev, a_cur, ybar, game);
      ybar = conditional_action(a_cur, next, game);
      s.breakpoints.push_back(next);
    } catch (const InfeasibleStep& e) {
      s.status = e.direction() == InfeasibleStep::Direction::Overshoot ? ShotStatus::Overshoot
                                                                        : ShotStatus::Undershoot;
      return s;
    }
  }
  return s;
}

bool matches(const Shot& s, int n, double d) {
  if (s.status != ShotStatus::Feasible) return false;
  if (static_cast<int>(s.breakpoints.size()) != n + 1) return false;
  for (std::size_t i = 1; i < s.breakpoints.size(); ++i) {
    if (!(s.breakpoints[i] > s.breakpoints[i - 1])) return false;
  }
  return d - s.breakpoints.back() <= kTerminalMatch;
}

// Bisects a1 on (lo, hi) where shoot(lo) is not an overshoot and shoot(hi) is.
Shot bisect_a1(double lo, double hi, int n, const BiasGame& game) {
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    Shot s = shoot(mid, n, game);
    if (s.status == ShotStatus::Overshoot) {
      hi = mid;
    } else {
      lo = mid;
      if (s.status == ShotStatus::Feasible && s.breakpoints.back() == game.d()) return s;
    }
  }
  return shoot(lo, n, game);
}

PartitionEquilibrium finish(std::vector<double> breakpoints, const BiasGame& game) {
  PartitionEquilibrium eq;
  eq.b = game.b();
  eq.c = game.c();
  eq.d = game.d();
  breakpoints.front() = game.c();
  breakpoints.back() = game.d();
  eq.breakpoints = std::move(breakpoints);
  for (std::size_t i = 0; i + 1 < eq.breakpoints.size(); ++i) {
    eq.actions.push_back(conditional_action(eq.breakpoints[i], eq.breakpoints[i + 1], game));
  }
  eq.arbitrage_residuals = arbitrage_residuals(eq.breakpoints, eq.actions);
  return eq;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prior / game

Prior Prior::uniform() { return Prior(); }

Prior Prior::table(std::vector<double> edges, std::vector<double> densities) {
  if (edges.size() < 2 || densities.size() + 1 != edges.size()) {
    throw DomainError("table prior needs K+1 edges and K densities");
  }
  if (edges.front() != 0.0 || edges.back() != 1.0) {
    throw DomainError("table prior edges must start at 0 and end at 1");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < densities.size(); ++k) {
    if (!(edges[k + 1] > edges[k])) throw DomainError("table prior edges must increase");
    if (!(densities[k] > 0.0) || !std::isfinite(densities[k])) {
      throw DomainError("table prior densities must be positive");
    }
    total += densities[k] * (edges[k + 1] - edges[k]);
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw DomainError("table prior must integrate to 1, got " + std::to_string(total));
  }
  Prior p;
  p.edges_ = std::move(edges);
  p.densities_ = std::move(densities);
  return p;
}

double Prior::density(double m) const {
  if (m < 0.0 || m > 1.0) return 0.0;
  if (is_uniform()) return 1.0;
  auto it = std::upper_bound(edges_.begin(), edges_.end(), m);
  std::size_t k = static_cast<std::size_t>(it - edges_.begin());
  k = std::clamp<std::size_t>(k, 1, densities_.size()) - 1;
  return densities_[k];
}

double Prior::mass(double lo, double hi) const {
  if (is_uniform()) return std::max(0.0, std::min(hi, 1.0) - std::max(lo, 0.0));
  double total = 0.0;
  for (std::size_t k = 0; k < densities_.size(); ++k) {
    const double a = std::max(lo, edges_[k]);
    const double b = std::min(hi, edges_[k + 1]);
    if (b > a) total += densities_[k] * (b - a);
  }
  return total;
}

BiasGame::BiasGame(double b, double c, double d, Prior prior)
    : ideal_(b), c_(c), d_(d), prior_(std::move(prior)) {
  if (!(0.0 <= c && c < d && d <= 1.0)) throw DomainError("state interval needs 0 <= c < d <= 1");
}

double utility_judge(double y, double m, const BiasedIdealDecision& bias) {
  const double t = y - bias(m);
  return -t * t;
}

// ---------------------------------------------------------------------------
// Sequential game

std::string to_string(Mover m) { return m == Mover::Algorithm ? "algorithm" : "judge"; }

SequentialTrace sequential_simulate(double b, int horizon, std::span<const double> grid,
                                    double step_epsilon) {
  const BiasedIdealDecision bias(b);
  if (horizon < 1) throw DomainError("horizon must be >= 1");
  if (!(step_epsilon > 0.0 && step_epsilon < 0.5)) throw DomainError("step epsilon must be in (0, 0.5)");
  for (double m : grid) {
    if (!(m >= 0.0 && m <= 1.0)) throw DomainError("state grid values must lie in [0,1]");
  }

  SequentialTrace trace;
  trace.b = b;
  trace.step_epsilon = step_epsilon;
  for (int T = 1; T <= horizon; ++T) {
    SequentialRound r;
    r.T = T;
    if (T == 1) {
      r.mover = Mover::Judge;
      r.judge_k = 1;
      r.algorithm_k = 0;
    } else if (T % 2 == 0) {
      r.mover = Mover::Algorithm;
      r.judge_k = T / 2;
      r.algorithm_k = T / 2;
    } else {
      r.mover = Mover::Judge;
      r.algorithm_k = (T - 1) / 2;
      r.judge_k = r.algorithm_k + 1;
    }
    const double judge_shift = r.judge_k * b;
    const double algo_shift = r.algorithm_k * b;
    r.samples.reserve(grid.size());
    for (double m : grid) {
      const double n = shift_log_odds(m, -algo_shift);
      r.samples.push_back({m, n, shift_log_odds(n, judge_shift)});
    }
    r.near_step = shift_log_odds(step_epsilon, judge_shift) > 1.0 - step_epsilon;
    trace.rounds.push_back(std::move(r));
  }
  return trace;
}

int rounds_until_step(double b, double epsilon) {
  if (!(b > 0.0)) throw DomainError("rounds_until_step needs b > 0");
  return static_cast<int>(std::ceil(2.0 * std::log((1.0 - epsilon) / epsilon) / b));
}

// ---------------------------------------------------------------------------
// Conditional action

double ideal_antiderivative(double m, double b) {
  const double cb = std::expm1(b);
  if (cb == 0.0) return 0.5 * m * m;
  return std::exp(b) / cb * (m - std::log1p(cb * m) / cb);
}

double conditional_action(double a_lo, double a_hi, const BiasGame& game) {
  check_interval(a_lo, a_hi, game);
  if (a_lo == a_hi) return game.ideal()(a_lo);
  if (!game.prior().is_uniform()) return conditional_action_quadrature(a_lo, a_hi, game);

  // Mean of e^b m / (1 + ĉm) over [lo, hi], ĉ = e^b − 1, rewritten so that
  // no cancellation occurs as b → 0 or hi → lo.
  const double b = game.b();
  const double cb = std::expm1(b);
  const double base = 1.0 + cb * a_lo;
  const double width = a_hi - a_lo;
  const double t = cb * width / base;
  return std::exp(b) * (a_lo + chi(t) * width / base) / base;
}

double conditional_action_quadrature(double a_lo, double a_hi, const BiasGame& game) {
  check_interval(a_lo, a_hi, game);
  if (a_lo == a_hi) return game.ideal()(a_lo);
  const auto& ideal = game.ideal();
  const auto [num, den] =
      weighted_integrals([&ideal](double m) { return ideal(m); }, a_lo, a_hi, game.prior());
  return num / den;
}

// ---------------------------------------------------------------------------
// Partition equilibria

NoEquilibrium::NoEquilibrium(int n)
    : Error("no partition equilibrium of size " + std::to_string(n)), n_(n) {}

double forward_step(double a_prev, double a_cur, double ybar_prev, const BiasGame& game) {
  check_interval(a_prev, a_cur, game);
  // Quadratic U^A: indifference at a_cur means a_cur is the midpoint of the two actions.
  const double required = 2.0 * a_cur - ybar_prev;
  if (required <= game.ideal()(a_cur)) {
    throw InfeasibleStep("required action lies below g_b(a_cur); no a_next > a_cur",
                         InfeasibleStep::Direction::Undershoot);
  }
  const double d = game.d();
  if (conditional_action(a_cur, d, game) < required) {
    throw InfeasibleStep("partition cannot be extended: even a_next = d is too low",
                         InfeasibleStep::Direction::Overshoot);
  }
  if (aligned_uniform(game)) return std::min(d, 2.0 * required - a_cur);

  // ȳ(a_cur, ·) is continuous and strictly increasing.
  double lo = a_cur, hi = d;
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (conditional_action(a_cur, mid, game) < required) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double f_lo = std::abs(conditional_action(a_cur, lo, game) - required);
  const double f_hi = std::abs(conditional_action(a_cur, hi, game) - required);
  return (f_lo < f_hi && lo > a_cur) ? lo : hi;
}

std::vector<double> arbitrage_residuals(std::span<const double> breakpoints,
                                        std::span<const double> actions) {
  std::vector<double> out;
  for (std::size_t i = 1; i < actions.size(); ++i) {
    const double a = breakpoints[i];
    out.push_back(utility_algorithm(actions[i], a) - utility_algorithm(actions[i - 1], a));
  }
  return out;
}

PartitionEquilibrium solve_partition(int n, const BiasGame& game) {
  if (n < 1) throw DomainError("partition size must be >= 1");
  const double c = game.c(), d = game.d();
  if (n == 1) return finish({c, d}, game);

  if (shoot(d, n, game).status == ShotStatus::Overshoot) {
    Shot s = bisect_a1(c, d, n, game);
    if (matches(s, n, d)) return finish(std::move(s.breakpoints), game);
  }

  // Scan-then-bisect: the terminal mismatch need not be monotone in a1 for table priors.
  constexpr int kScan = 1000;
  double prev_a = c;
  bool prev_high = false;
  for (int i = 1; i <= kScan; ++i) {
    const double a = c + (d - c) * i / kScan;
    const bool high = shoot(a, n, game).status == ShotStatus::Overshoot;
    if (high && !prev_high) {
      Shot s = bisect_a1(prev_a, a, n, game);
      if (matches(s, n, d)) return finish(std::move(s.breakpoints), game);
    }
    prev_a = a;
    prev_high = high;
  }
  throw NoEquilibrium(n);
}

int max_partition_size(const BiasGame& game) {
  if (game.b() == 0.0) {
    throw UnboundedPartition("players are aligned (b = 0): partitions of every size exist");
  }
  for (int n = 2; n <= kPartitionGuard; ++n) {
    try {
      (void)solve_partition(n, game);
    } catch (const NoEquilibrium&) {
      return n - 1;
    }
  }
  throw UnboundedPartition("partition size guard reached (" + std::to_string(kPartitionGuard) +
                           "); players are numerically aligned");
}

std::vector<int> sweep_max_partition_size(std::span<const double> biases, double c, double d,
                                          const Prior& prior, unsigned threads) {
  std::vector<int> out(biases.size(), 0);
  if (biases.empty()) return out;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, biases.size()));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next.fetch_add(1)) < biases.size();) {
      try {
        out[i] = max_partition_size(BiasGame(biases[i], c, d, prior));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EquilibriumVerification verify_equilibrium(const PartitionEquilibrium& eq, const BiasGame& game,
                                           int m_samples, std::uint64_t seed) {
  constexpr double kActionTol = 1e-8;
  constexpr double kIcTol = 1e-9;
  constexpr double kResidualTol = 1e-9;

  EquilibriumVerification v;
  const auto& a = eq.breakpoints;
  const auto& y = eq.actions;
  const std::size_t n = y.size();

  if (n < 1 || a.size() != n + 1) {
    v.failures.push_back("equilibrium needs N actions and N + 1 breakpoints");
    return v;
  }
  for (double p : a) {
    if (p < game.c() || p > game.d()) {
      v.failures.push_back("breakpoint outside [c, d]");
      return v;
    }
  }
  constexpr double kImageSlack = 1e-12;
  v.ordering = a.front() == game.c() && a.back() == game.d();
  for (std::size_t i = 1; v.ordering && i < a.size(); ++i) v.ordering = a[i] > a[i - 1];
  for (std::size_t i = 1; v.ordering && i < n; ++i) v.ordering = y[i] > y[i - 1];
  for (std::size_t i = 0; v.ordering && i < n; ++i) {
    v.ordering = y[i] >= game.ideal()(a[i]) - kImageSlack &&
                 y[i] <= game.ideal()(a[i + 1]) + kImageSlack;
  }
  if (!v.ordering) v.failures.push_back("breakpoints/actions are not strictly ordered");

  // (i) Judge best response, against the quadrature optimum of the expected U^J.
  for (std::size_t i = 0; i < n; ++i) {
    const double best = conditional_action_quadrature(a[i], a[i + 1], game);
    v.max_action_error = std::max(v.max_action_error, std::abs(best - y[i]));
  }
  v.judge_best_response = v.max_action_error <= kActionTol;
  if (!v.judge_best_response) v.failures.push_back("judge action is not a best response");

  // (ii) The algorithm never prefers an adjacent interval's action.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_real_distribution<double> draw(a[i], a[i + 1]);
    for (int s = 0; s < m_samples; ++s) {
      const double m = draw(rng);
      const double own = utility_algorithm(y[i], m);
      for (std::size_t j : {i - 1, i + 1}) {
        if (j >= n) continue;
        v.max_ic_violation = std::max(v.max_ic_violation, utility_algorithm(y[j], m) - own);
      }
    }
  }
  v.sender_incentive_compatible = v.max_ic_violation <= kIcTol;
  if (!v.sender_incentive_compatible) {
    v.failures.push_back("algorithm gains by inducing an adjacent action");
  }

  // (iii) Indifference at the interior breakpoints.
  for (double r : arbitrage_residuals(a, y)) v.max_residual = std::max(v.max_residual, std::abs(r));
  v.arbitrage = v.max_residual <= kResidualTol;
  if (!v.arbitrage) v.failures.push_back("arbitrage condition violated");
  return v;
}

double sample_recommendation(double m, const PartitionEquilibrium& eq, std::uint64_t seed) {
  const auto& a = eq.breakpoints;
  if (a.size() < 2) throw DomainError("equilibrium has no intervals");
  if (!(m >= a.front() && m <= a.back())) throw DomainError("state outside [c, d]");
  auto it = std::upper_bound(a.begin(), a.end(), m);
  std::size_t i = static_cast<std::size_t>(it - a.begin());
  i = std::min(i, a.size() - 1) - 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(a[i], a[i + 1]);
  return draw(rng);
}

}  // namespace reco
