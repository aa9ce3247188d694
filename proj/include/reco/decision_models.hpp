#pragma once

// Judge decision models: the linear-in-log-odds (LLO) weighting function, the
// feature-conditional LLO decision rule, its closed-form inverse and partial
// derivatives, and the bias-parameterized ideal decision of a strategic judge.
//
// Everything is evaluated in log-odds space: logit(y) = log δ + γ·logit(n).

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reco {

/// Inputs this close to 0 or 1 are snapped onto the endpoint.
inline constexpr double kEndpointSnap = 1e-15;

double logit(double p);
/// Numerically stable inverse logit.
double inv_logit(double z);

/// Monotone link δ(·) mapping the feature score βᵀx′ to the LLO elevation.
class Link {
 public:
  enum class Kind { Exponential, IdentityShifted };

  /// δ(u) = e^u.
  static Link exponential() { return Link(Kind::Exponential, 0.0); }
  /// δ(u) = u + shift. Only positive on u > −shift; evaluating outside that
  /// half-line raises DomainError.
  static Link identity_shifted(double shift = 1.0) {
    return Link(Kind::IdentityShifted, shift);
  }
  /// Parses "exp" or "identity" / "identity:<shift>".
  static Link parse(std::string_view name);

  Kind kind() const { return kind_; }
  double shift() const { return shift_; }
  std::string name() const;

  double delta(double u) const;
  double delta_prime(double u) const;
  double log_delta(double u) const;
  /// δ(u)/δ′(u); identically 1 for the exponential link.
  double delta_over_derivative(double u) const;
  /// Inverse of δ: the score u with δ(u) = value (value > 0).
  double inverse(double value) const;

  /// Samples `samples` points in [lo, hi] and checks positivity and strict increase.
  bool check_monotone(double lo, double hi, int samples = 64) const;

  bool operator==(const Link&) const = default;

 private:
  Link(Kind kind, double shift) : kind_(kind), shift_(shift) {}
  Kind kind_;
  double shift_;
};

/// Judge-visible features x′ = A(x).
struct ObservedFeatures {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ObservedFeatures&) const = default;
};

/// Parameters (γ, β, δ) of the static LLO decision rule.
class LloModel {
 public:
  /// Throws DomainError unless gamma ∈ (0, 1].
  LloModel(double gamma, std::vector<double> beta, Link link = Link::exponential());

  double gamma() const { return gamma_; }
  const std::vector<double>& beta() const { return beta_; }
  const Link& link() const { return link_; }
  std::size_t dim() const { return beta_.size(); }

  /// βᵀx′; throws DimensionError on mismatch.
  double score(const ObservedFeatures& xp) const;

 private:
  double gamma_;
  std::vector<double> beta_;
  Link link_;
};

/// w(p) = δp^γ / (δp^γ + (1−p)^γ).
double llo_weight(double p, double gamma, double delta);

/// Judge decision g(n, x′) = w(n; γ, δ(βᵀx′)).
double g_eval(double n, const ObservedFeatures& xp, const LloModel& model);

/// Unique recommendation n with g_eval(n, x′) = y.
double g_invert(double y, const ObservedFeatures& xp, const LloModel& model);

struct GPartials {
  double dh_du;      ///< h′(u, γ, n)
  double dh_dgamma;  ///< h_γ(u, γ, n)
};

/// Partial derivatives of h(u, γ, n) = w(n; γ, δ(u)). Requires n ∈ (0, 1).
GPartials g_partials(double n, double u, const LloModel& model);
/// Same, with γ and the link given explicitly (no LloModel range check on γ).
GPartials g_partials(double n, double u, double gamma, const Link& link);

/// Ideal decision of a judge with bias b ≥ 0: g_b(m) = e^b m / (e^b m + 1 − m).
class BiasedIdealDecision {
 public:
  explicit BiasedIdealDecision(double b);

  double b() const { return b_; }
  /// Odds multiplier e^b; equals the LLO δ with γ = 1.
  double delta() const;
  double operator()(double m) const;
  /// Inverse of g_b on [0, 1].
  double inverse(double y) const;

 private:
  double b_;
};

double ideal_decision(double m, const BiasedIdealDecision& bias);

/// g_b applied k times, which multiplies the odds by e^{kb}.
BiasedIdealDecision compose_ideal(const BiasedIdealDecision& bias, int k);

/// Multiplies the odds of p by e^shift (any sign). Endpoints are fixed.
double shift_log_odds(double p, double shift);

}  // namespace reco
