#include "reco/decision_models.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "reco/errors.hpp"

namespace reco {

namespace {

// Snaps float noise at the endpoints and rejects anything else outside [0, 1].
double checked_probability(double p, const char* what) {
  if (!(p >= -kEndpointSnap && p <= 1.0 + kEndpointSnap)) {
    throw DomainError(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
  }
  if (p <= kEndpointSnap) return 0.0;
  if (p >= 1.0 - kEndpointSnap) return 1.0;
  return p;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw DomainError("gamma must lie in (0,1], got " + std::to_string(gamma));
  }
}

}  // namespace

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Link

Link Link::parse(std::string_view name) {
  if (name == "exp" || name == "exponential") return exponential();
  if (name == "identity") return identity_shifted();
  constexpr std::string_view prefix = "identity:";
  if (name.substr(0, prefix.size()) == prefix) {
    const auto rest = name.substr(prefix.size());
    double shift = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), shift);
    if (ec == std::errc() && ptr == rest.data() + rest.size()) return identity_shifted(shift);
  }
  throw DomainError("unknown link '" + std::string(name) + "' (expected exp or identity[:shift])");
}

std::string Link::name() const {
  if (kind_ == Kind::Exponential) return "exp";
  if (shift_ == 1.0) return "identity";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, shift_);
  return "identity:" + std::string(buf, res.ptr);
}

double Link::delta(double u) const {
  if (kind_ == Kind::Exponential) return std::exp(u);
  const double v = u + shift_;
  if (!(v > 0.0)) {
    throw DomainError("identity-shifted link is not positive at u=" + std::to_string(u));
  }
  return v;
}

double Link::delta_prime(double u) const {
  if (kind_ == Kind::Exponential) return std::exp(u);
  (void)delta(u);
  return 1.0;
}

double Link::log_delta(double u) const {
  if (kind_ == Kind::Exponential) return u;
  return std::log(delta(u));
}

double Link::delta_over_derivative(double u) const {
  if (kind_ == Kind::Exponential) return 1.0;
  return delta(u);
}

double Link::inverse(double value) const {
  if (!(value > 0.0)) throw DomainError("link inverse needs a positive value");
  if (kind_ == Kind::Exponential) return std::log(value);
  return value - shift_;
}

bool Link::check_monotone(double lo, double hi, int samples) const {
  double prev = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const double u = lo + (hi - lo) * i / (samples - 1);
    if (kind_ == Kind::IdentityShifted && !(u + shift_ > 0.0)) return false;
    const double v = delta(u);
    if (!(v > 0.0) || !(v > prev)) return false;
    prev = v;
  }
  return true;
}

// ---------------------------------------------------------------------------
// LloModel

LloModel::LloModel(double gamma, std::vector<double> beta, Link link)
    : gamma_(gamma), beta_(std::move(beta)), link_(link) {
  check_gamma(gamma_);
  for (double b : beta_) {
    if (!std::isfinite(b)) throw DomainError("beta entries must be finite");
  }
}

double LloModel::score(const ObservedFeatures& xp) const {
  if (xp.size() != beta_.size()) {
    throw DimensionError("observed features have dimension " + std::to_string(xp.size()) +
                         " but beta has dimension " + std::to_string(beta_.size()));
  }
  double u = 0.0;
  for (std::size_t i = 0; i < beta_.size(); ++i) u += beta_[i] * xp.values[i];
  return u;
}

// ---------------------------------------------------------------------------
// LLO weighting and decision rule

double llo_weight(double p, double gamma, double delta) {
  p = checked_probability(p, "p");
  check_gamma(gamma);
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError("delta must be positive and finite, got " + std::to_string(delta));
  }
  if (p == 0.0 || p == 1.0) return p;
  return inv_logit(std::log(delta) + gamma * logit(p));
}

double g_eval(double n, const ObservedFeatures& xp, const LloModel& model) {
  n = checked_probability(n, "recommendation n");
  const double log_delta = model.link().log_delta(model.score(xp));
  if (n == 0.0 || n == 1.0) return n;
  return inv_logit(log_delta + model.gamma() * logit(n));
}

double g_invert(double y, const ObservedFeatures& xp, const LloModel& model) {
  y = checked_probability(y, "decision y");
  const double log_delta = model.link().log_delta(model.score(xp));
  if (y == 0.0 || y == 1.0) return y;
  return inv_logit((logit(y) - log_delta) / model.gamma());
}

GPartials g_partials(double n, double u, double gamma, const Link& link) {
  if (!(n > 0.0 && n < 1.0)) {
    throw DomainError("g_partials requires n in (0,1), got " + std::to_string(n));
  }
  // h = σ(z), z = log δ(u) + γ·logit(n); σ′ = σ(1−σ).
  const double ln = logit(n);
  const double h = inv_logit(link.log_delta(u) + gamma * ln);
  const double s = h * (1.0 - h);
  return {s * link.delta_prime(u) / link.delta(u), s * ln};
}

GPartials g_partials(double n, double u, const LloModel& model) {
  return g_partials(n, u, model.gamma(), model.link());
}

// ---------------------------------------------------------------------------
// Strategic judge

double shift_log_odds(double p, double shift) {
  p = checked_probability(p, "probability");
  if (p == 0.0 || p == 1.0 || shift == 0.0) return p;
  return inv_logit(logit(p) + shift);
}

BiasedIdealDecision::BiasedIdealDecision(double b) : b_(b) {
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw DomainError("bias must be finite and >= 0 (reverse signs for negative bias), got " +
                      std::to_string(b));
  }
}

double BiasedIdealDecision::delta() const { return std::exp(b_); }

double BiasedIdealDecision::operator()(double m) const { return shift_log_odds(m, b_); }

double BiasedIdealDecision::inverse(double y) const { return shift_log_odds(y, -b_); }

double ideal_decision(double m, const BiasedIdealDecision& bias) { return bias(m); }

BiasedIdealDecision compose_ideal(const BiasedIdealDecision& bias, int k) {
  if (k < 1) throw DomainError("composition count must be >= 1");
  return BiasedIdealDecision(k * bias.b());
}

}  // namespace reco
