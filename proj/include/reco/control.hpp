#pragma once

// Controllability of a judge through recommendations, and synthesis of the
// steering recommendation.

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "reco/decision_models.hpp"
#include "reco/errors.hpp"

namespace reco {

/// Binary mask picking which full features the judge processes.
class AttentionMask {
 public:
  explicit AttentionMask(std::vector<int> mask);

  const std::vector<int>& mask() const { return mask_; }
  std::size_t full_dim() const { return mask_.size(); }
  std::size_t observed_dim() const { return observed_dim_; }

  /// x′ = the selected coordinates of x, in order.
  ObservedFeatures apply(std::span<const double> x) const;

 private:
  std::vector<int> mask_;
  std::size_t observed_dim_ = 0;
};

/// Ideal prediction function f: x ↦ m ∈ [0,1].
class IdealPredictor {
 public:
  struct LinearLogistic {
    std::vector<double> weights;
    double intercept = 0.0;
  };
  struct Table {
    std::vector<std::pair<std::vector<double>, double>> rows;
  };

  static IdealPredictor linear_logistic(std::vector<double> weights, double intercept = 0.0);
  static IdealPredictor table(Table table);

  double operator()(std::span<const double> x) const;

  const std::variant<LinearLogistic, Table>& repr() const { return repr_; }

 private:
  explicit IdealPredictor(std::variant<LinearLogistic, Table> repr) : repr_(std::move(repr)) {}
  std::variant<LinearLogistic, Table> repr_;
};

/// y = g(n, x′). Every rule is declared nondecreasing in n.
class DecisionRule {
 public:
  virtual ~DecisionRule() = default;
  virtual double decide(double n, const ObservedFeatures& xp) const = 0;
  /// Rules with an analytic inverse override this.
  virtual std::optional<double> closed_form_inverse(double /*y*/,
                                                    const ObservedFeatures& /*xp*/) const {
    return std::nullopt;
  }
};

class LloRule final : public DecisionRule {
 public:
  explicit LloRule(LloModel model) : model_(std::move(model)) {}
  double decide(double n, const ObservedFeatures& xp) const override;
  std::optional<double> closed_form_inverse(double y, const ObservedFeatures& xp) const override;
  const LloModel& model() const { return model_; }

 private:
  LloModel model_;
};

/// y = intercept + slope·n.
class AffineRule final : public DecisionRule {
 public:
  AffineRule(double intercept, double slope);
  double decide(double n, const ObservedFeatures& xp) const override;

 private:
  double intercept_;
  double slope_;
};

/// LLO squeezed into [lo, hi]: y = lo + (hi − lo)·g(n, x′). Limited-range fixture.
class TruncatedLloRule final : public DecisionRule {
 public:
  TruncatedLloRule(LloModel model, double lo, double hi);
  double decide(double n, const ObservedFeatures& xp) const override;

 private:
  LloModel model_;
  double lo_;
  double hi_;
};

/// Wraps an arbitrary callable.
class FunctionRule final : public DecisionRule {
 public:
  using Fn = std::function<double(double, const ObservedFeatures&)>;
  explicit FunctionRule(Fn fn) : fn_(std::move(fn)) {}
  double decide(double n, const ObservedFeatures& xp) const override { return fn_(n, xp); }

 private:
  Fn fn_;
};

struct DecisionRange {
  double low = 0.0;
  double high = 1.0;
  bool contains(double y) const { return y >= low && y <= high; }
};

struct ControlVerdict {
  bool controllable = false;
  std::optional<double> witness_n;
  DecisionRange achievable_range;
  double target = 0.0;
};

/// Raised by recommend() when the target is outside the achievable range.
class TargetOutOfRange : public Error {
 public:
  TargetOutOfRange(double target, DecisionRange range);
  double target() const { return target_; }
  const DecisionRange& range() const { return range_; }

 private:
  double target_;
  DecisionRange range_;
};

/// (g(0, x′), g(1, x′)). Throws ContractError if a midpoint probe shows g is not monotone.
DecisionRange achievable_range(const DecisionRule& rule, const ObservedFeatures& xp);

/// Smallest n ∈ [0,1] with g(n, x′) ≥ target, by bisection to machine precision.
double recommend_by_bisection(double target, const ObservedFeatures& xp, const DecisionRule& rule);

/// Recommendation that makes the judge decide `target_m`. Uses the rule's
/// closed-form inverse when it has one, bisection otherwise.
/// Result satisfies |g(n, x′) − target_m| ≤ 1e−10.
double recommend(double target_m, const ObservedFeatures& xp, const DecisionRule& rule);

ControlVerdict full_control_at(const IdealPredictor& f, const DecisionRule& rule,
                               const AttentionMask& mask, std::span<const double> x);

}  // namespace reco
