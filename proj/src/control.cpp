#include "reco/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace reco {

namespace {

constexpr double kControlTolerance = 1e-10;

std::string describe(double target, const DecisionRange& r) {
  std::ostringstream os;
  os.precision(10);
  os << "target " << target << " outside achievable range [" << r.low << ", " << r.high << "]";
  return os.str();
}

}  // namespace

AttentionMask::AttentionMask(std::vector<int> mask) : mask_(std::move(mask)) {
  for (int v : mask_) {
    if (v != 0 && v != 1) throw DomainError("attention mask entries must be 0 or 1");
    observed_dim_ += static_cast<std::size_t>(v);
  }
  if (observed_dim_ == 0) throw DomainError("attention mask must select at least one feature");
}

ObservedFeatures AttentionMask::apply(std::span<const double> x) const {
  if (x.size() != mask_.size()) {
    throw DimensionError("feature vector has dimension " + std::to_string(x.size()) +
                         " but mask has dimension " + std::to_string(mask_.size()));
  }
  ObservedFeatures xp;
  xp.values.reserve(observed_dim_);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (mask_[i] == 1) xp.values.push_back(x[i]);
  }
  return xp;
}

IdealPredictor IdealPredictor::linear_logistic(std::vector<double> weights, double intercept) {
  return IdealPredictor(LinearLogistic{std::move(weights), intercept});
}

IdealPredictor IdealPredictor::table(Table table) {
  for (const auto& [x, m] : table.rows) {
    if (!(m >= 0.0 && m <= 1.0)) throw DomainError("predictor table values must lie in [0,1]");
  }
  return IdealPredictor(std::move(table));
}

double IdealPredictor::operator()(std::span<const double> x) const {
  if (const auto* lin = std::get_if<LinearLogistic>(&repr_)) {
    if (x.size() != lin->weights.size()) {
      throw DimensionError("predictor expects dimension " + std::to_string(lin->weights.size()) +
                           ", got " + std::to_string(x.size()));
    }
    double s = lin->intercept;
    for (std::size_t i = 0; i < x.size(); ++i) s += lin->weights[i] * x[i];
    return inv_logit(s);
  }
  const auto& tab = std::get<Table>(repr_);
  for (const auto& [key, m] : tab.rows) {
    if (key.size() == x.size() && std::equal(key.begin(), key.end(), x.begin())) return m;
  }
  throw DomainError("feature vector not present in predictor table");
}

double LloRule::decide(double n, const ObservedFeatures& xp) const { return g_eval(n, xp, model_); }

std::optional<double> LloRule::closed_form_inverse(double y, const ObservedFeatures& xp) const {
  return g_invert(y, xp, model_);
}

AffineRule::AffineRule(double intercept, double slope) : intercept_(intercept), slope_(slope) {
  if (slope < 0.0) throw DomainError("affine rule slope must be >= 0");
  if (intercept < 0.0 || intercept + slope > 1.0) {
    throw DomainError("affine rule must map [0,1] into [0,1]");
  }
}

double AffineRule::decide(double n, const ObservedFeatures&) const {
  return intercept_ + slope_ * n;
}

TruncatedLloRule::TruncatedLloRule(LloModel model, double lo, double hi)
    : model_(std::move(model)), lo_(lo), hi_(hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
    throw DomainError("truncated rule needs 0 <= lo < hi <= 1");
  }
}

double TruncatedLloRule::decide(double n, const ObservedFeatures& xp) const {
  return lo_ + (hi_ - lo_) * g_eval(n, xp, model_);
}

TargetOutOfRange::TargetOutOfRange(double target, DecisionRange range)
    : Error(describe(target, range)), target_(target), range_(range) {}

DecisionRange achievable_range(const DecisionRule& rule, const ObservedFeatures& xp) {
  const double y0 = rule.decide(0.0, xp);
  const double ymid = rule.decide(0.5, xp);
  const double y1 = rule.decide(1.0, xp);
  if (!(y0 <= ymid && ymid <= y1)) {
    throw ContractError("decision rule is not monotone nondecreasing in n");
  }
  return {y0, y1};
}

double recommend_by_bisection(double target, const ObservedFeatures& xp,
                              const DecisionRule& rule) {
  double lo = 0.0;
  double hi = 1.0;
  if (rule.decide(lo, xp) >= target) return lo;
  // Invariant: g(lo) < target <= g(hi).
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (rule.decide(mid, xp) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double recommend(double target_m, const ObservedFeatures& xp, const DecisionRule& rule) {
  const DecisionRange range = achievable_range(rule, xp);
  if (!range.contains(target_m)) throw TargetOutOfRange(target_m, range);

  double n = 0.0;
  if (auto closed = rule.closed_form_inverse(target_m, xp)) {
    n = *closed;
  } else {
    n = recommend_by_bisection(target_m, xp, rule);
  }
  if (std::abs(rule.decide(n, xp) - target_m) > kControlTolerance) {
    throw ContractError("decision rule does not attain the target (discontinuous rule?)");
  }
  return n;
}

ControlVerdict full_control_at(const IdealPredictor& f, const DecisionRule& rule,
                               const AttentionMask& mask, std::span<const double> x) {
  const ObservedFeatures xp = mask.apply(x);
  ControlVerdict v;
  v.target = f(x);
  v.achievable_range = achievable_range(rule, xp);
  v.controllable = v.achievable_range.contains(v.target);
  if (v.controllable) v.witness_n = recommend(v.target, xp, rule);
  return v;
}

}  // namespace reco
