#include "reco/identification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

namespace reco {

namespace {

Eigen::JacobiSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

int numerical_rank(const Eigen::VectorXd& singular_values) {
  if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
  const double cut = kRankCutoff * singular_values(0);
  int r = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values(i) > cut) ++r;
  }
  return r;
}

bool interior(double p) { return p > 0.0 && p < 1.0; }

std::string join(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// LloObservation

double LloObservation::value(double u, std::span<const double> theta, double n) const {
  if (n <= 0.0 || n >= 1.0) return n <= 0.0 ? 0.0 : 1.0;
  return inv_logit(link_.log_delta(u) + theta[0] * logit(n));
}

double LloObservation::d_du(double u, std::span<const double> theta, double n) const {
  return g_partials(n, u, theta[0], link_).dh_du;
}

void LloObservation::grad_theta(double u, std::span<const double> theta, double n,
                                std::span<double> out) const {
  out[0] = g_partials(n, u, theta[0], link_).dh_dgamma;
}

// ---------------------------------------------------------------------------
// ParameterBox / IdentificationProblem

ParameterBox ParameterBox::uniform(std::size_t beta_dim, double lo, double hi,
                                   std::vector<double> theta_lo, std::vector<double> theta_hi) {
  return {std::vector<double>(beta_dim, lo), std::vector<double>(beta_dim, hi),
          std::move(theta_lo), std::move(theta_hi)};
}

void ParameterBox::validate(std::size_t beta_dim, std::size_t theta_dim) const {
  if (beta_lo.size() != beta_dim || beta_hi.size() != beta_dim) {
    throw DimensionError("parameter box beta bounds must have dimension " +
                         std::to_string(beta_dim));
  }
  if (theta_lo.size() != theta_dim || theta_hi.size() != theta_dim) {
    throw DimensionError("parameter box theta bounds must have dimension " +
                         std::to_string(theta_dim));
  }
  auto ok = [](double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && lo < hi; };
  for (std::size_t i = 0; i < beta_dim; ++i) {
    if (!ok(beta_lo[i], beta_hi[i])) throw DomainError("parameter box needs finite lo < hi");
  }
  for (std::size_t i = 0; i < theta_dim; ++i) {
    if (!ok(theta_lo[i], theta_hi[i])) throw DomainError("parameter box needs finite lo < hi");
  }
}

bool ParameterBox::contains(std::span<const double> beta, std::span<const double> theta) const {
  if (beta.size() != beta_lo.size() || theta.size() != theta_lo.size()) return false;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (beta[i] < beta_lo[i] || beta[i] > beta_hi[i]) return false;
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] < theta_lo[i] || theta[i] > theta_hi[i]) return false;
  }
  return true;
}

std::pair<std::vector<double>, std::vector<double>> ParameterBox::center() const {
  std::vector<double> b(beta_lo.size()), t(theta_lo.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 * (beta_lo[i] + beta_hi[i]);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 * (theta_lo[i] + theta_hi[i]);
  return {b, t};
}

IdentificationProblem IdentificationProblem::llo(Dataset dataset, Link link, ParameterBox box) {
  dataset.validate();
  IdentificationProblem p{std::move(dataset), std::make_shared<LloObservation>(link),
                          std::move(box)};
  p.box.validate(p.beta_dim(), 1);
  return p;
}

IdentificationProblem IdentificationProblem::llo(Dataset dataset, Link link) {
  const std::size_t dp = dataset.observed_dim();
  return llo(std::move(dataset), link, ParameterBox::uniform(dp, -1.0, 1.0, {0.1}, {1.0}));
}

std::optional<Link> IdentificationProblem::llo_link() const {
  if (const auto* m = dynamic_cast<const LloObservation*>(model.get())) return m->link();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Jacobian and conditions

JacobianBlocks assemble_jacobian(const IdentificationProblem& problem,
                                 std::span<const double> beta, std::span<const double> theta) {
  const std::size_t dp = problem.beta_dim();
  const std::size_t L = problem.theta_dim();
  if (beta.size() != dp) throw DimensionError("beta dimension does not match observed features");
  if (theta.size() != L) throw DimensionError("theta dimension does not match the model");

  JacobianBlocks out;
  const auto& recs = problem.dataset.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].xp.size() != dp) throw DimensionError("inconsistent observed feature dimension");
    if (interior(recs[i].n)) {
      out.rows.push_back(i);
    } else {
      out.warnings.push_back("record " + std::to_string(i) +
                             " has an endpoint recommendation and was excluded");
    }
  }
  if (out.rows.empty()) throw DomainError("no usable records after endpoint exclusion");

  const auto N = static_cast<Eigen::Index>(out.rows.size());
  out.X.resize(N, static_cast<Eigen::Index>(dp));
  out.B.resize(N);
  out.Theta.resize(N, static_cast<Eigen::Index>(L));
  std::vector<double> grad(L);
  for (Eigen::Index r = 0; r < N; ++r) {
    const auto& rec = recs[out.rows[static_cast<std::size_t>(r)]];
    double u = 0.0;
    for (std::size_t k = 0; k < dp; ++k) {
      out.X(r, static_cast<Eigen::Index>(k)) = rec.xp.values[k];
      u += beta[k] * rec.xp.values[k];
    }
    out.B(r) = problem.model->d_du(u, theta, rec.n);
    problem.model->grad_theta(u, theta, rec.n, grad);
    for (std::size_t k = 0; k < L; ++k) out.Theta(r, static_cast<Eigen::Index>(k)) = grad[k];
  }
  return out;
}

ConditionCheck check_conditions(const IdentificationProblem& problem,
                                std::span<const double> beta, std::span<const double> theta) {
  JacobianBlocks J = assemble_jacobian(problem, beta, theta);
  ConditionCheck c;
  c.warnings = std::move(J.warnings);

  const auto dp = J.X.cols();
  const auto svd = thin_svd(J.X);
  c.x_rank = numerical_rank(svd.singularValues());
  c.rank_ok = c.x_rank == dp;

  // Ratio matrix Θ./B; for L = 1 this is the vector d.
  Eigen::MatrixXd ratio = J.Theta.array().colwise() / J.B.array();
  c.d = ratio.col(0);

  bool nonzero = true;
  for (Eigen::Index k = 0; k < ratio.cols(); ++k) {
    const double nrm = ratio.col(k).norm();
    if (!(nrm > 1e-12)) {
      nonzero = false;
    } else {
      ratio.col(k) /= nrm;
    }
  }
  if (nonzero) {
    const Eigen::MatrixXd U = svd.matrixU().leftCols(c.x_rank);
    const Eigen::MatrixXd resid = ratio - U * (U.transpose() * ratio);
    if (resid.cols() == 1) {
      c.d_residual = resid.norm();
    } else {
      c.d_residual = thin_svd(resid).singularValues().minCoeff();
    }
  }
  c.independence_ok = nonzero && c.d_residual > kIndependenceCutoff;

  const Eigen::MatrixXd BX = J.B.asDiagonal() * J.X;
  c.perpendicularity_norm = (BX.transpose() * J.Theta).norm();
  c.perpendicular_ok = c.perpendicularity_norm <= kPerpendicularCutoff;
  return c;
}

std::optional<std::pair<std::size_t, std::size_t>> corollary_check(const Dataset& dataset) {
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& rec = dataset.records[i];
    std::vector<double> key(rec.xp.values.size());
    for (std::size_t k = 0; k < key.size(); ++k) {
      key[k] = std::round(rec.xp.values[k] * 1e12) / 1e12;
    }
    auto& members = groups[key];
    for (std::size_t j : members) {
      if (dataset.records[j].n != rec.n) return std::pair{j, i};
    }
    members.push_back(i);
  }
  return std::nullopt;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Identified: return "Identified";
    case Verdict::RankDeficient: return "RankDeficient";
    case Verdict::DependentDerivatives: return "DependentDerivatives";
    case Verdict::ModelMismatch: return "ModelMismatch";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

struct FitRows {
  Eigen::MatrixXd X;
  Eigen::VectorXd logit_n;
  Eigen::VectorXd n;
  Eigen::VectorXd y;
  std::vector<std::string> warnings;
};

FitRows usable_rows(const Dataset& ds) {
  FitRows out;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (interior(r.n) && interior(r.y)) {
      keep.push_back(i);
    } else {
      out.warnings.push_back("record " + std::to_string(i) +
                             " has n or y at an endpoint and was excluded from fitting");
    }
  }
  const auto N = static_cast<Eigen::Index>(keep.size());
  const auto dp = static_cast<Eigen::Index>(ds.observed_dim());
  out.X.resize(N, dp);
  out.logit_n.resize(N);
  out.n.resize(N);
  out.y.resize(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    const auto& rec = ds.records[keep[static_cast<std::size_t>(r)]];
    for (Eigen::Index k = 0; k < dp; ++k) out.X(r, k) = rec.xp.values[static_cast<std::size_t>(k)];
    out.n(r) = rec.n;
    out.logit_n(r) = logit(rec.n);
    out.y(r) = rec.y;
  }
  return out;
}

IdentificationReport failed_report(const IdentificationProblem& problem,
                                   const std::optional<FitInit>& init) {
  auto [beta, theta] = problem.box.center();
  if (init && init->beta.size() == beta.size()) {
    beta = init->beta;
    theta = {init->gamma};
  }
  IdentificationReport rep;
  rep.evaluated_beta = beta;
  rep.evaluated_theta = theta;
  rep.corollary_pair = corollary_check(problem.dataset);
  try {
    const ConditionCheck c = check_conditions(problem, beta, theta);
    rep.x_rank = c.x_rank;
    rep.d_vector.assign(c.d.data(), c.d.data() + c.d.size());
    rep.d_residual = c.d_residual;
    rep.perpendicularity_norm = c.perpendicularity_norm;
    rep.rank_ok = c.rank_ok;
    rep.independence_ok = c.independence_ok;
    rep.perpendicular_ok = c.perpendicular_ok;
    rep.warnings = c.warnings;
  } catch (const DomainError& e) {
    rep.warnings.push_back(e.what());
  }
  rep.verdict = rep.rank_ok ? Verdict::DependentDerivatives : Verdict::RankDeficient;
  return rep;
}

// Max |y − ŷ| and the raw residual vector at (β, γ).
double raw_residuals(const FitRows& rows, const Link& link, const Eigen::VectorXd& beta,
                     double gamma, Eigen::VectorXd* out) {
  const Eigen::VectorXd u = rows.X * beta;
  double worst = 0.0;
  if (out) out->resize(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double yhat = inv_logit(link.log_delta(u(i)) + gamma * rows.logit_n(i));
    const double r = rows.y(i) - yhat;
    if (out) (*out)(i) = r;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

// Least squares with one round of iterative refinement.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
  const auto svd = thin_svd(A);
  Eigen::VectorXd x = svd.solve(rhs);
  x += svd.solve(rhs - A * x);
  return x;
}

}  // namespace

FitResult fit(const IdentificationProblem& problem, const std::optional<FitInit>& init,
              const FitOptions& options) {
  const auto link = problem.llo_link();
  if (!link) throw DomainError("fit() supports the LLO observation model only");
  problem.dataset.validate();

  FitRows rows = usable_rows(problem.dataset);
  const auto dp = rows.X.cols();
  const auto N = rows.X.rows();
  if (N < dp + 1) {
    throw NotIdentifiable("fewer usable records than parameters", failed_report(problem, init));
  }

  Eigen::MatrixXd design(N, dp + 1);
  design << rows.X, rows.logit_n;
  const auto design_svd = thin_svd(design);
  if (numerical_rank(design_svd.singularValues()) < dp + 1) {
    throw NotIdentifiable("design matrix [X | logit(n)] is rank deficient",
                          failed_report(problem, init));
  }

  FitResult res;
  res.warnings = rows.warnings;
  const Eigen::VectorXd logit_y = rows.y.unaryExpr([](double v) { return logit(v); });

  // logit(y) = log δ(βᵀx′) + γ logit(n) is linear in (β, γ) for δ = exp.
  const Eigen::VectorXd lin = solve_ls(design, logit_y);
  const bool direct = link->kind() == Link::Kind::Exponential &&
                      options.method == FitOptions::Method::Auto;
  if (direct) {
    res.beta.assign(lin.data(), lin.data() + dp);
    res.gamma = lin(dp);
    res.fit_residual =
        raw_residuals(rows, *link, Eigen::Map<const Eigen::VectorXd>(lin.data(), dp), res.gamma,
                      nullptr);
    return res;
  }

  Eigen::VectorXd p(dp + 1);
  if (init) {
    if (static_cast<Eigen::Index>(init->beta.size()) != dp) {
      throw DimensionError("initial beta has the wrong dimension");
    }
    p << Eigen::Map<const Eigen::VectorXd>(init->beta.data(), dp), init->gamma;
  } else {
    // Map the exp-link scores through the actual link: δ_i = e^{u_i} ⇒ u_i′ = δ⁻¹(e^{u_i}).
    const Eigen::VectorXd u_exp = rows.X * lin.head(dp);
    Eigen::VectorXd target(N);
    for (Eigen::Index i = 0; i < N; ++i) target(i) = link->inverse(std::exp(u_exp(i)));
    p << solve_ls(rows.X, target), lin(dp);
  }

  std::vector<std::vector<double>> trace;
  auto record = [&](const Eigen::VectorXd& v) { trace.emplace_back(v.data(), v.data() + v.size()); };
  auto sse = [&](const Eigen::VectorXd& q, Eigen::VectorXd* r) -> double {
    try {
      Eigen::VectorXd tmp;
      raw_residuals(rows, *link, q.head(dp), q(dp), &tmp);
      if (r) *r = tmp;
      return tmp.squaredNorm();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd r;
  double cost = sse(p, &r);
  if (!std::isfinite(cost)) {
    throw ConvergenceError("initial point lies outside the link's domain", {});
  }
  record(p);
  Eigen::MatrixXd J(N, dp + 1);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd u = rows.X * p.head(dp);
    for (Eigen::Index i = 0; i < N; ++i) {
      const GPartials g = g_partials(rows.n(i), u(i), p(dp), *link);
      J.row(i) << g.dh_du * rows.X.row(i), g.dh_dgamma;
    }
    Eigen::VectorXd step = solve_ls(J, r);
    double accepted = 0.0;
    for (int halving = 0; halving < 40; ++halving) {
      Eigen::VectorXd trial_r;
      const Eigen::VectorXd trial = p + step;
      const double trial_cost = sse(trial, &trial_r);
      if (trial_cost <= cost) {
        p = trial;
        r = std::move(trial_r);
        cost = trial_cost;
        accepted = step.lpNorm<Eigen::Infinity>();
        break;
      }
      step *= 0.5;
    }
    record(p);
    if (accepted < options.step_tolerance) {
      res.beta.assign(p.data(), p.data() + dp);
      res.gamma = p(dp);
      res.iterations = it;
      res.fit_residual = r.lpNorm<Eigen::Infinity>();
      return res;
    }
  }
  throw ConvergenceError("Gauss-Newton did not converge in " +
                             std::to_string(options.max_iterations) + " iterations (last iterate " +
                             join(trace.back()) + ")",
                         std::move(trace));
}

IdentificationReport identify(const IdentificationProblem& problem,
                              const std::optional<FitInit>& init) {
  FitResult fr;
  try {
    fr = fit(problem, init);
  } catch (const NotIdentifiable& e) {
    IdentificationReport rep = e.report();
    if (rep.rank_ok && rep.independence_ok) {
      // Conditions hold at the evaluation point but the fitted design is singular.
      rep.verdict = Verdict::DependentDerivatives;
    }
    rep.warnings.push_back(e.what());
    rep.records_used = 0;
    return rep;
  }

  IdentificationReport rep;
  rep.fitted_beta = fr.beta;
  rep.fitted_gamma = fr.gamma;
  rep.fit_residual = fr.fit_residual;
  rep.evaluated_beta = fr.beta;
  rep.evaluated_theta = {fr.gamma};
  rep.corollary_pair = corollary_check(problem.dataset);
  const ConditionCheck c = check_conditions(problem, fr.beta, rep.evaluated_theta);
  rep.x_rank = c.x_rank;
  rep.d_vector.assign(c.d.data(), c.d.data() + c.d.size());
  rep.d_residual = c.d_residual;
  rep.perpendicularity_norm = c.perpendicularity_norm;
  rep.rank_ok = c.rank_ok;
  rep.independence_ok = c.independence_ok;
  rep.perpendicular_ok = c.perpendicular_ok;
  rep.warnings = fr.warnings;
  rep.records_used = 0;
  for (const auto& r : problem.dataset.records) rep.records_used += interior(r.n) && interior(r.y);

  if (!c.rank_ok) {
    rep.verdict = Verdict::RankDeficient;
  } else if (!c.independence_ok) {
    rep.verdict = Verdict::DependentDerivatives;
  } else if (fr.fit_residual > kFitTolerance) {
    rep.verdict = Verdict::ModelMismatch;
  } else {
    rep.verdict = Verdict::Identified;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Grid certification

CertificationReport certify_global(const IdentificationProblem& problem, int grid_points_per_dim,
                                   unsigned threads) {
  if (grid_points_per_dim < 1) throw DomainError("grid_points_per_dim must be >= 1");
  problem.box.validate(problem.beta_dim(), problem.theta_dim());
  const std::size_t dims = problem.box.dim();
  const auto per = static_cast<std::size_t>(grid_points_per_dim);
  std::size_t total = 1;
  for (std::size_t k = 0; k < dims; ++k) {
    if (total > kMaxGridPoints / per) {
      throw DomainError("certification grid exceeds " + std::to_string(kMaxGridPoints) +
                        " points");
    }
    total *= per;
  }

  std::vector<double> lo = problem.box.beta_lo, hi = problem.box.beta_hi;
  lo.insert(lo.end(), problem.box.theta_lo.begin(), problem.box.theta_lo.end());
  hi.insert(hi.end(), problem.box.theta_hi.begin(), problem.box.theta_hi.end());
  const std::size_t dp = problem.beta_dim();

  CertificationReport rep;
  rep.points.resize(total);
  auto eval_point = [&](std::size_t idx) {
    std::vector<double> coords(dims);
    std::size_t rem = idx;
    for (std::size_t k = dims; k-- > 0;) {
      const std::size_t j = rem % per;
      rem /= per;
      coords[k] = per == 1 ? 0.5 * (lo[k] + hi[k])
                           : lo[k] + (hi[k] - lo[k]) * static_cast<double>(j) /
                                         static_cast<double>(per - 1);
    }
    GridPointResult& g = rep.points[idx];
    g.beta.assign(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(dp));
    g.theta.assign(coords.begin() + static_cast<std::ptrdiff_t>(dp), coords.end());
    const ConditionCheck c = check_conditions(problem, g.beta, g.theta);
    g.rank_ok = c.rank_ok;
    g.independence_ok = c.independence_ok;
    g.perpendicular_ok = c.perpendicular_ok;
    g.d_residual = c.d_residual;
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    for (std::size_t i = 0; i < total; ++i) eval_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; !failed && (i = next.fetch_add(1)) < total;) {
          try {
            eval_point(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (const auto& g : rep.points) rep.passed += g.passed();
  rep.all_pass = rep.passed == total;
  rep.verdict = rep.all_pass ? "hypotheses hold on sampled grid"
                             : "hypotheses fail at " + std::to_string(total - rep.passed) + " of " +
                                   std::to_string(total) + " grid points";
  return rep;
}

}  // namespace reco
