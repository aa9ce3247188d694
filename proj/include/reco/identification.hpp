#pragma once

// Recovery of the judge's parameters (β, θ) from logged interactions, and the
// rank / independence diagnostics that certify when recovery is unique.
//
// Observation model: y_i = h(βᵀx_i′, θ, n_i). For the LLO judge θ = (γ) and
// h(u, γ, n) = w(n; γ, δ(u)).

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "reco/dataset.hpp"
#include "reco/decision_models.hpp"
#include "reco/errors.hpp"

namespace reco {

/// A known nonlinear observation function h(u, θ, n) with θ ∈ ℝ^L.
class ObservationModel {
 public:
  virtual ~ObservationModel() = default;
  virtual std::size_t theta_dim() const = 0;
  virtual double value(double u, std::span<const double> theta, double n) const = 0;
  /// ∂h/∂u, required to be strictly positive.
  virtual double d_du(double u, std::span<const double> theta, double n) const = 0;
  /// ∇_θ h written into `out` (size theta_dim()).
  virtual void grad_theta(double u, std::span<const double> theta, double n,
                          std::span<double> out) const = 0;
};

/// LLO judge: θ = (γ).
class LloObservation final : public ObservationModel {
 public:
  explicit LloObservation(Link link) : link_(link) {}
  std::size_t theta_dim() const override { return 1; }
  double value(double u, std::span<const double> theta, double n) const override;
  double d_du(double u, std::span<const double> theta, double n) const override;
  void grad_theta(double u, std::span<const double> theta, double n,
                  std::span<double> out) const override;
  const Link& link() const { return link_; }

 private:
  Link link_;
};

/// Compact box for β (set B) and θ (set T).
struct ParameterBox {
  std::vector<double> beta_lo, beta_hi;
  std::vector<double> theta_lo, theta_hi;

  /// Same bounds for every β coordinate.
  static ParameterBox uniform(std::size_t beta_dim, double beta_lo, double beta_hi,
                              std::vector<double> theta_lo, std::vector<double> theta_hi);

  std::size_t dim() const { return beta_lo.size() + theta_lo.size(); }
  void validate(std::size_t beta_dim, std::size_t theta_dim) const;
  bool contains(std::span<const double> beta, std::span<const double> theta) const;
  std::pair<std::vector<double>, std::vector<double>> center() const;
};

struct IdentificationProblem {
  Dataset dataset;
  std::shared_ptr<const ObservationModel> model;
  ParameterBox box;

  /// LLO judge with the given link; θ = (γ).
  static IdentificationProblem llo(Dataset dataset, Link link, ParameterBox box);
  /// Box β ∈ [−1, 1]^D′, γ ∈ [0.1, 1].
  static IdentificationProblem llo(Dataset dataset, Link link = Link::exponential());

  std::size_t beta_dim() const { return dataset.observed_dim(); }
  std::size_t theta_dim() const { return model->theta_dim(); }
  /// LLO link if the model is LloObservation.
  std::optional<Link> llo_link() const;
};

/// Jacobian blocks of the observation map at (β, θ).
struct JacobianBlocks {
  Eigen::MatrixXd X;      ///< N×D′, rows x_i′ᵀ
  Eigen::VectorXd B;      ///< h′(βᵀx_i′, θ, n_i)
  Eigen::MatrixXd Theta;  ///< N×L, rows ∇_θ hᵀ
  std::vector<std::size_t> rows;  ///< dataset indices that were used
  std::vector<std::string> warnings;
};

/// Records with n ∈ {0, 1} are skipped (with a warning): derivatives
/// degenerate there. Throws DimensionError or DomainError.
JacobianBlocks assemble_jacobian(const IdentificationProblem& problem,
                                 std::span<const double> beta, std::span<const double> theta);

struct ConditionCheck {
  bool rank_ok = false;
  bool independence_ok = false;
  bool perpendicular_ok = false;
  double d_residual = 0.0;
  int x_rank = 0;
  Eigen::VectorXd d;            ///< Θ./B (first column of the ratio matrix)
  double perpendicularity_norm = 0.0;  ///< ‖(diag(B)X)ᵀΘ‖_F
  std::vector<std::string> warnings;
};

inline constexpr double kRankCutoff = 1e-10;        // relative to largest singular value
inline constexpr double kIndependenceCutoff = 1e-8;  // on unit-normalized d
inline constexpr double kPerpendicularCutoff = 1e-8;
inline constexpr double kFitTolerance = 1e-8;

ConditionCheck check_conditions(const IdentificationProblem& problem,
                                std::span<const double> beta, std::span<const double> theta);

/// Some (i, j), i < j, with x_i′ = x_j′ (after rounding to 12 decimals) and n_i ≠ n_j.
std::optional<std::pair<std::size_t, std::size_t>> corollary_check(const Dataset& dataset);

enum class Verdict { Identified, RankDeficient, DependentDerivatives, ModelMismatch };
std::string to_string(Verdict v);

struct IdentificationReport {
  int x_rank = 0;
  std::vector<double> d_vector;
  double d_residual = 0.0;
  double perpendicularity_norm = 0.0;
  bool rank_ok = false;
  bool independence_ok = false;
  bool perpendicular_ok = false;
  std::optional<std::pair<std::size_t, std::size_t>> corollary_pair;
  std::optional<std::vector<double>> fitted_beta;
  std::optional<double> fitted_gamma;
  std::optional<double> fit_residual;
  std::vector<double> evaluated_beta;   ///< where the conditions were checked
  std::vector<double> evaluated_theta;
  std::size_t records_used = 0;
  std::vector<std::string> warnings;
  Verdict verdict = Verdict::RankDeficient;
};

class NotIdentifiable : public Error {
 public:
  NotIdentifiable(const std::string& what, IdentificationReport report)
      : Error(what), report_(std::move(report)) {}
  const IdentificationReport& report() const { return report_; }

 private:
  IdentificationReport report_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<std::vector<double>> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<std::vector<double>>& trace() const { return trace_; }

 private:
  std::vector<std::vector<double>> trace_;
};

struct FitInit {
  std::vector<double> beta;
  double gamma = 0.5;
};

struct FitOptions {
  enum class Method { Auto, GaussNewton };
  Method method = Method::Auto;
  int max_iterations = 200;
  double step_tolerance = 1e-12;
};

struct FitResult {
  std::vector<double> beta;
  double gamma = 0.0;
  double fit_residual = 0.0;  ///< max_i |y_i − ŷ_i|
  int iterations = 0;         ///< 0 for the direct linear solve
  std::vector<std::string> warnings;
};

/// Fits (β, γ) of an LLO judge. With the exponential link (and Method::Auto)
/// logit(y) = βᵀx′ + γ·logit(n) is solved by linear least squares; otherwise
/// damped Gauss–Newton on y − ŷ, starting from `init` or from the linear
/// solution mapped through the link. Records with n or y ∈ {0, 1} are skipped.
/// Throws NotIdentifiable on a rank-deficient design, ConvergenceError when
/// Gauss–Newton stalls.
FitResult fit(const IdentificationProblem& problem, const std::optional<FitInit>& init = {},
              const FitOptions& options = {});

/// fit() followed by check_conditions at the fitted parameters. On a
/// rank-deficient design the conditions are evaluated at the box center and
/// the report is returned instead of thrown.
IdentificationReport identify(const IdentificationProblem& problem,
                              const std::optional<FitInit>& init = {});

struct GridPointResult {
  std::vector<double> beta;
  std::vector<double> theta;
  bool rank_ok = false;
  bool independence_ok = false;
  bool perpendicular_ok = false;
  double d_residual = 0.0;
  bool passed() const { return rank_ok && independence_ok; }
};

struct CertificationReport {
  std::vector<GridPointResult> points;  ///< in grid (row-major) order
  std::size_t passed = 0;
  bool all_pass = false;
  std::string verdict;
};

inline constexpr std::size_t kMaxGridPoints = 1'000'000;

/// Evaluates check_conditions on a uniform grid over the parameter box.
/// A sampled certificate, not a proof. One point per dimension means the box center.
CertificationReport certify_global(const IdentificationProblem& problem,
                                   int grid_points_per_dim, unsigned threads = 0);

}  // namespace reco
