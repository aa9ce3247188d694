#pragma once

// The strategic judge. Two games are modelled:
//
//  * the sequential alternating game, where the algorithm and the judge take
//    turns best-responding (myopically) to each other's last rule; and
//  * the simultaneous cheap-talk game, whose equilibria are partitions of the
//    state interval [c, d]: the algorithm only reveals which interval holds
//    the state, and the judge plays the interval-conditional optimal action.
//
// Utilities are quadratic: U^A(y, m) = −(y − m)², U^J(y, m, b) = −(y − g_b(m))².

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reco/decision_models.hpp"
#include "reco/errors.hpp"

namespace reco {

/// Prior density μ on [0, 1]: uniform, or piecewise constant on `edges`.
class Prior {
 public:
  static Prior uniform();
  /// edges: 0 = e_0 < … < e_K = 1; densities: K positive values integrating to 1.
  static Prior table(std::vector<double> edges, std::vector<double> densities);

  bool is_uniform() const { return densities_.empty(); }
  double density(double m) const;
  /// ∫_lo^hi μ(m) dm (exact for both kinds).
  double mass(double lo, double hi) const;
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& densities() const { return densities_; }

 private:
  Prior() = default;
  std::vector<double> edges_{0.0, 1.0};
  std::vector<double> densities_;
};

class BiasGame {
 public:
  BiasGame(double b, double c = 0.0, double d = 1.0, Prior prior = Prior::uniform());

  double b() const { return ideal_.b(); }
  double c() const { return c_; }
  double d() const { return d_; }
  const Prior& prior() const { return prior_; }
  const BiasedIdealDecision& ideal() const { return ideal_; }

 private:
  BiasedIdealDecision ideal_;
  double c_;
  double d_;
  Prior prior_;
};

inline double utility_algorithm(double y, double m) { return -(y - m) * (y - m); }
double utility_judge(double y, double m, const BiasedIdealDecision& bias);

// ---------------------------------------------------------------------------
// Sequential game

enum class Mover { Algorithm, Judge };
std::string to_string(Mover m);

struct SamplePoint {
  double m = 0.0;
  double n = 0.0;
  double y = 0.0;
};

struct SequentialRound {
  int T = 0;
  Mover mover = Mover::Judge;
  int judge_k = 1;      ///< judge plays y = g_b^k(n)
  int algorithm_k = 0;  ///< algorithm plays n = (g_b^k)⁻¹(m); 0 = truthful
  std::vector<SamplePoint> samples;
  bool near_step = false;  ///< g_b^k(ε) > 1 − ε
};

struct SequentialTrace {
  double b = 0.0;
  double step_epsilon = 0.01;
  std::vector<SequentialRound> rounds;
};

/// Rules are held as composition counts and evaluated through the odds law
/// g_b^k = g_{kb}.
SequentialTrace sequential_simulate(double b, int horizon, std::span<const double> grid,
                                    double step_epsilon = 0.01);

/// Smallest k for which g_{kb}(ε) > 1 − ε is guaranteed: ⌈2 ln((1 − ε)/ε) / b⌉.
int rounds_until_step(double b, double epsilon = 0.01);

// ---------------------------------------------------------------------------
// Simultaneous game

class InfeasibleStep : public Error {
 public:
  /// Overshoot: even a_next = d leaves the conditional action below what the
  /// arbitrage condition needs. Undershoot: the required action is already
  /// below g_b(a_cur), so no a_next > a_cur works.
  enum class Direction { Overshoot, Undershoot };
  InfeasibleStep(const std::string& what, Direction dir) : Error(what), dir_(dir) {}
  Direction direction() const { return dir_; }

 private:
  Direction dir_;
};

class NoEquilibrium : public Error {
 public:
  explicit NoEquilibrium(int n);
  int size() const { return n_; }

 private:
  int n_;
};

class UnboundedPartition : public Error {
 public:
  using Error::Error;
};

struct PartitionEquilibrium {
  double b = 0.0;
  double c = 0.0;
  double d = 1.0;
  std::vector<double> breakpoints;          ///< a_0 = c < … < a_N = d
  std::vector<double> actions;              ///< ȳ(a_i, a_{i+1})
  std::vector<double> arbitrage_residuals;  ///< N − 1 values
  int size() const { return static_cast<int>(actions.size()); }
};

/// ȳ(a_lo, a_hi): prior-weighted mean of g_b over [a_lo, a_hi]; g_b(a_lo) when
/// the interval is degenerate. Closed form under the uniform prior, adaptive
/// quadrature for table priors.
double conditional_action(double a_lo, double a_hi, const BiasGame& game);

/// Always by adaptive quadrature (absolute tolerance 1e−10), for any prior.
double conditional_action_quadrature(double a_lo, double a_hi, const BiasGame& game);

/// ∫ e^b m / ((e^b − 1) m + 1) dm, the antiderivative used by the uniform closed form.
double ideal_antiderivative(double m, double b);

/// Next breakpoint from the arbitrage condition a_cur = (ȳ_prev + ȳ(a_cur, a_next)) / 2.
double forward_step(double a_prev, double a_cur, double ybar_prev, const BiasGame& game);

/// U^A(ȳ_i, a_i) − U^A(ȳ_{i−1}, a_i) for every interior breakpoint.
std::vector<double> arbitrage_residuals(std::span<const double> breakpoints,
                                        std::span<const double> actions);

/// Partition equilibrium of size N by shooting on a_1. Throws NoEquilibrium.
PartitionEquilibrium solve_partition(int n, const BiasGame& game);

inline constexpr int kPartitionGuard = 10'000;

/// Largest N with a partition equilibrium. Throws UnboundedPartition when the
/// players are aligned (b = 0) or the guard is reached.
int max_partition_size(const BiasGame& game);

/// max_partition_size for each bias, in input order.
std::vector<int> sweep_max_partition_size(std::span<const double> biases, double c, double d,
                                          const Prior& prior = Prior::uniform(),
                                          unsigned threads = 0);

struct EquilibriumVerification {
  bool judge_best_response = false;
  bool sender_incentive_compatible = false;
  bool arbitrage = false;
  bool ordering = false;
  double max_action_error = 0.0;
  double max_ic_violation = 0.0;
  double max_residual = 0.0;
  std::vector<std::string> failures;
  bool verified() const {
    return judge_best_response && sender_incentive_compatible && arbitrage && ordering;
  }
};

EquilibriumVerification verify_equilibrium(const PartitionEquilibrium& eq, const BiasGame& game,
                                           int m_samples = 200, std::uint64_t seed = 0x5eed);

/// Uniform draw on the partition interval that contains m ([a_i, a_{i+1}),
/// last interval closed). Deterministic in `seed`.
double sample_recommendation(double m, const PartitionEquilibrium& eq, std::uint64_t seed);

}  // namespace reco
