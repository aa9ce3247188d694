#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "oracles.hpp"
#include "reco/identification.hpp"
#include "reco/synthetic.hpp"

using namespace reco;

namespace {

InteractionRecord record(std::vector<double> xp, double n, double gamma, const std::vector<double>& beta,
                         const Link& link = Link::exponential()) {
  double u = 0.0;
  for (std::size_t k = 0; k < xp.size(); ++k) u += beta[k] * xp[k];
  InteractionRecord r;
  r.xp.values = std::move(xp);
  r.n = n;
  r.y = oracle::llo(n, gamma, link.delta(u));
  return r;
}

// Random x′ rows, each observed under several distinct recommendations.
Dataset corollary_dataset(std::mt19937_64& rng, std::size_t dp, std::size_t groups, std::size_t per_group,
                          double gamma, const std::vector<double>& beta,
                          const Link& link = Link::exponential()) {
  std::uniform_real_distribution<double> x(-1.0, 1.0), n(0.05, 0.95);
  Dataset ds;
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<double> xp(dp);
    for (auto& v : xp) v = x(rng);
    for (std::size_t k = 0; k < per_group; ++k) ds.records.push_back(record(xp, n(rng), gamma, beta, link));
  }
  return ds;
}

// Every record shares one x′ and one n.
Dataset constant_dataset(std::size_t count) {
  Dataset ds;
  for (std::size_t i = 0; i < count; ++i) ds.records.push_back(record({0.3, -0.2}, 0.4, 0.7, {0.5, 0.5}));
  return ds;
}

// n_i chosen so that logit(n_i) = cᵀx_i′, which puts d inside C(X).
Dataset aligned_dataset(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> x(-1.0, 1.0);
  Dataset ds;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> xp{x(rng), x(rng)};
    const double n = inv_logit(0.8 * xp[0] - 0.5 * xp[1]);
    ds.records.push_back(record(xp, n, 0.6, {0.2, -0.1}));
  }
  return ds;
}

Eigen::VectorXd projection_residual(const Eigen::MatrixXd& X, const Eigen::VectorXd& d) {
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(d);
  return d - X * coef;
}

// Toy L = 2 model: h = σ(u + θ₀ logit n + θ₁ logit(n)³), h′ > 0.
class CubicLogit final : public ObservationModel {
 public:
  std::size_t theta_dim() const override { return 2; }
  double value(double u, std::span<const double> t, double n) const override {
    const double z = logit(n);
    return inv_logit(u + t[0] * z + t[1] * z * z * z);
  }
  double d_du(double u, std::span<const double> t, double n) const override {
    const double y = value(u, t, n);
    return y * (1.0 - y);
  }
  void grad_theta(double u, std::span<const double> t, double n, std::span<double> out) const override {
    const double s = d_du(u, t, n), z = logit(n);
    out[0] = s * z;
    out[1] = s * z * z * z;
  }
};

}  // namespace

TEST_CASE("jacobian examples") {
  Dataset ds;
  ds.records.push_back(record({1.0, 0.5}, 0.5, 0.6, {0.2, 0.1}));
  ds.records.push_back(record({0.2, -0.5}, 0.8, 0.6, {0.2, 0.1}));
  const auto p = IdentificationProblem::llo(ds);
  const std::vector<double> beta{0.2, 0.1}, theta{0.6};
  const auto J = assemble_jacobian(p, beta, theta);
  CHECK(std::abs(J.Theta(0, 0)) < 1e-15);
  CHECK(J.B.minCoeff() > 0.0);
  CHECK(J.X(1, 1) == -0.5);
  CHECK_THROWS_AS(assemble_jacobian(p, std::vector<double>{0.1}, theta), DimensionError);
}

TEST_CASE("endpoint records are excluded with a warning") {
  Dataset ds;
  ds.records.push_back(record({1.0}, 0.0, 0.6, {0.2}));
  ds.records.push_back(record({1.0}, 0.3, 0.6, {0.2}));
  const auto p = IdentificationProblem::llo(ds);
  const auto J = assemble_jacobian(p, std::vector<double>{0.2}, std::vector<double>{0.6});
  CHECK(J.rows == std::vector<std::size_t>{1});
  CHECK(J.warnings.size() == 1);
  Dataset only_endpoints;
  only_endpoints.records.push_back(record({1.0}, 1.0, 0.6, {0.2}));
  CHECK_THROWS_AS(assemble_jacobian(IdentificationProblem::llo(only_endpoints), std::vector<double>{0.2},
                                    std::vector<double>{0.6}),
                  DomainError);
}

TEST_CASE("jacobian entries match finite differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> b(-1.0, 1.0), g(0.2, 0.9);
  for (const Link link : {Link::exponential(), Link::identity_shifted(4.0)}) {
    for (int point = 0; point < 5; ++point) {
      const std::vector<double> beta{b(rng), b(rng)};
      const double gamma = g(rng);
      const auto ds = corollary_dataset(rng, 2, 6, 3, gamma, beta, link);
      const auto J = assemble_jacobian(IdentificationProblem::llo(ds, link), beta, std::vector<double>{gamma});
      for (Eigen::Index r = 0; r < J.X.rows(); ++r) {
        const auto& rec = ds.records[J.rows[static_cast<std::size_t>(r)]];
        const double u = beta[0] * rec.xp.values[0] + beta[1] * rec.xp.values[1];
        const double fd_u = oracle::central_difference(
            [&](double v) { return oracle::llo(rec.n, gamma, link.delta(v)); }, u);
        const double fd_g = oracle::central_difference(
            [&](double gg) { return oracle::llo(rec.n, gg, link.delta(u)); }, gamma);
        CHECK(std::abs(J.B(r) - fd_u) <= 1e-5 * std::abs(fd_u));
        CHECK(std::abs(J.Theta(r, 0) - fd_g) <= 1e-5 * std::max(std::abs(fd_g), 1e-6));
      }
    }
  }
}

TEST_CASE("check_conditions examples") {
  SUBCASE("shared x′ and n: d lies in C(X)") {
    const auto p = IdentificationProblem::llo(constant_dataset(6));
    const std::vector<double> beta{0.5, 0.5}, theta{0.7};
    const auto c = check_conditions(p, beta, theta);
    CHECK_FALSE(c.independence_ok);
    const auto J = assemble_jacobian(p, beta, theta);
    // One constant column spans the constant d; the projection residual vanishes.
    const Eigen::MatrixXd first = J.X.leftCols(1);
    CHECK(projection_residual(first, c.d).norm() <= 1e-12 * c.d.norm());
  }
  SUBCASE("same x′, n = 0.3 and 0.7") {
    Dataset ds;
    ds.records.push_back(record({1.0}, 0.3, 0.5, {0.2}));
    ds.records.push_back(record({1.0}, 0.7, 0.5, {0.2}));
    const auto c = check_conditions(IdentificationProblem::llo(ds), std::vector<double>{0.2},
                                    std::vector<double>{0.5});
    CHECK(c.rank_ok);
    CHECK(c.independence_ok);
    CHECK(c.d_residual > 0.5);
  }
  SUBCASE("fewer records than D′") {
    Dataset ds;
    ds.records.push_back(record({1.0, 2.0, 3.0}, 0.3, 0.5, {0.1, 0.1, 0.1}));
    ds.records.push_back(record({0.0, 1.0, 3.0}, 0.6, 0.5, {0.1, 0.1, 0.1}));
    const auto c = check_conditions(IdentificationProblem::llo(ds), std::vector<double>{0.1, 0.1, 0.1},
                                    std::vector<double>{0.5});
    CHECK_FALSE(c.rank_ok);
    CHECK(c.x_rank == 2);
  }
}

TEST_CASE("independence residual agrees with an explicit projection") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> beta{0.3, -0.6};
    const auto ds = corollary_dataset(rng, 2, 5, 3, 0.55, beta);
    const auto p = IdentificationProblem::llo(ds);
    const auto c = check_conditions(p, beta, std::vector<double>{0.55});
    const auto J = assemble_jacobian(p, beta, std::vector<double>{0.55});
    const Eigen::VectorXd unit = c.d / c.d.norm();
    CHECK(std::abs(projection_residual(J.X, unit).norm() - c.d_residual) <= 1e-10);
  }
}

TEST_CASE("d vector is logit(n)·δ/δ′ and independent of γ") {
  std::mt19937_64 rng(4);
  for (const Link link : {Link::exponential(), Link::identity_shifted(3.0)}) {
    const std::vector<double> beta{0.4, 0.2};
    const auto ds = corollary_dataset(rng, 2, 4, 3, 0.5, beta, link);
    const auto p = IdentificationProblem::llo(ds, link);
    const auto c1 = check_conditions(p, beta, std::vector<double>{0.3});
    const auto c2 = check_conditions(p, beta, std::vector<double>{0.9});
    for (Eigen::Index i = 0; i < c1.d.size(); ++i) {
      const auto& r = ds.records[static_cast<std::size_t>(i)];
      const double u = beta[0] * r.xp.values[0] + beta[1] * r.xp.values[1];
      const double expected = std::log(r.n / (1.0 - r.n)) * link.delta(u) / link.delta_prime(u);
      CHECK(std::abs(c1.d(i) - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
      CHECK(std::abs(c1.d(i) - c2.d(i)) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("duplicate rows of X give equal entries in every element of C(X)") {
  Eigen::MatrixXd X(4, 2);
  X << 1.0, 0.5, 1.0, 0.5, -0.3, 2.0, 0.7, 0.1;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Vector2d c(z(rng), z(rng));
    const Eigen::VectorXd v = X * c;
    CHECK(v(0) == v(1));
  }
}

TEST_CASE("corollary_check") {
  Dataset two;
  two.records.push_back(record({1.0, 0.0}, 0.2, 0.5, {0.0, 0.0}));
  two.records.push_back(record({1.0, 0.0}, 0.8, 0.5, {0.0, 0.0}));
  const auto pair = corollary_check(two);
  REQUIRE(pair.has_value());
  CHECK(pair->first == 0);
  CHECK(pair->second == 1);

  Dataset distinct;
  for (int i = 0; i < 5; ++i) distinct.records.push_back(record({i * 0.1, 1.0}, 0.2 + 0.1 * i, 0.5, {0.0, 0.0}));
  CHECK_FALSE(corollary_check(distinct).has_value());

  Dataset near;
  near.records.push_back(record({0.1 + 0.2}, 0.2, 0.5, {0.0}));
  near.records.push_back(record({0.3}, 0.4, 0.5, {0.0}));
  CHECK(corollary_check(near).has_value());
}

TEST_CASE("corollary pair in truthful synthetic data with a coarse mask") {
  PopulationSpec pop;
  pop.D = 5;
  pop.N = 60;
  pop.seed = 2024;
  pop.features = {BernoulliFeature{0.5}, UniformFeature{-1, 1}, UniformFeature{-1, 1}, UniformFeature{-1, 1},
                  UniformFeature{-1, 1}};
  ScenarioSpec s{pop, {{0.4, 1.0, -0.7, 0.5, 0.3}, 0.0}, AttentionMask({1, 0, 0, 0, 0}), LloModel(0.6, {0.5}),
                 true};
  CHECK(corollary_check(generate(s)).has_value());
}

TEST_CASE("fit recovers β = (0.4, −0.3), γ = 0.6") {
  std::mt19937_64 rng(99);
  const std::vector<double> beta{0.4, -0.3};
  const auto ds = corollary_dataset(rng, 2, 10, 5, 0.6, beta);
  REQUIRE(ds.size() == 50);
  const auto r = fit(IdentificationProblem::llo(ds));
  CHECK(std::abs(r.beta[0] - 0.4) <= 1e-9);
  CHECK(std::abs(r.beta[1] + 0.3) <= 1e-9);
  CHECK(std::abs(r.gamma - 0.6) <= 1e-9);
  CHECK(r.fit_residual < 1e-10);
  CHECK(r.iterations == 0);

  FitOptions gn;
  gn.method = FitOptions::Method::GaussNewton;
  const auto g = fit(IdentificationProblem::llo(ds), FitInit{{0.0, 0.0}, 0.5}, gn);
  CHECK(g.iterations > 0);
  CHECK(std::abs(g.beta[0] - r.beta[0]) <= 1e-9);
  CHECK(std::abs(g.beta[1] - r.beta[1]) <= 1e-9);
  CHECK(std::abs(g.gamma - r.gamma) <= 1e-9);
}

TEST_CASE("fit on identical records raises NotIdentifiable") {
  const auto p = IdentificationProblem::llo(constant_dataset(10));
  CHECK_THROWS_AS(fit(p), NotIdentifiable);
  try {
    fit(p);
  } catch (const NotIdentifiable& e) {
    CHECK(e.report().verdict != Verdict::Identified);
  }
  CHECK(identify(p).verdict != Verdict::Identified);
}

TEST_CASE("d inside C(X) is reported as dependent") {
  std::mt19937_64 rng(12);
  const auto rep = identify(IdentificationProblem::llo(aligned_dataset(rng, 30)));
  CHECK(rep.verdict != Verdict::Identified);
  CHECK_FALSE(rep.independence_ok);
}

TEST_CASE("ideal-decision data fits as γ = 1, β = b") {
  const double b = std::log(3.0);
  Dataset ds;
  for (int i = 1; i < 20; ++i) {
    InteractionRecord r;
    r.xp.values = {1.0};
    r.n = i / 20.0;
    r.y = oracle::ideal(r.n, b);
    ds.records.push_back(r);
  }
  const auto res = fit(IdentificationProblem::llo(ds));
  CHECK(std::abs(res.gamma - 1.0) <= 1e-9);
  CHECK(std::abs(res.beta[0] - b) <= 1e-9);
}

TEST_CASE("identity link is fitted by Gauss-Newton") {
  std::mt19937_64 rng(31);
  const Link link = Link::identity_shifted(2.0);
  const std::vector<double> beta{0.5, -0.4};
  const auto ds = corollary_dataset(rng, 2, 8, 4, 0.45, beta, link);
  const auto rep = identify(IdentificationProblem::llo(ds, link));
  REQUIRE(rep.verdict == Verdict::Identified);
  CHECK(std::abs((*rep.fitted_beta)[0] - 0.5) <= 1e-8);
  CHECK(std::abs((*rep.fitted_beta)[1] + 0.4) <= 1e-8);
  CHECK(std::abs(*rep.fitted_gamma - 0.45) <= 1e-8);
}

TEST_CASE("two random initializations converge to the same parameters") {
  std::mt19937_64 rng(77);
  const Link link = Link::identity_shifted(2.0);
  const std::vector<double> beta{0.3, 0.2};
  const auto p = IdentificationProblem::llo(corollary_dataset(rng, 2, 6, 4, 0.7, beta, link), link);
  FitOptions gn;
  gn.method = FitOptions::Method::GaussNewton;
  std::uniform_real_distribution<double> b(-0.5, 0.5), g(0.3, 1.0);
  for (int t = 0; t < 5; ++t) {
    const auto a = fit(p, FitInit{{b(rng), b(rng)}, g(rng)}, gn);
    const auto c = fit(p, FitInit{{b(rng), b(rng)}, g(rng)}, gn);
    if (a.fit_residual <= 1e-10 && c.fit_residual <= 1e-10) {
      CHECK(std::abs(a.beta[0] - c.beta[0]) <= 1e-8);
      CHECK(std::abs(a.beta[1] - c.beta[1]) <= 1e-8);
      CHECK(std::abs(a.gamma - c.gamma) <= 1e-8);
    }
  }
}

TEST_CASE("wrong link leaves a residual and a ModelMismatch verdict") {
  std::mt19937_64 rng(41);
  const auto ds = corollary_dataset(rng, 1, 6, 4, 0.6, {0.8}, Link::identity_shifted(1.0));
  const auto rep = identify(IdentificationProblem::llo(ds));
  CHECK(rep.verdict == Verdict::ModelMismatch);
  CHECK(*rep.fit_residual > kFitTolerance);
}

TEST_CASE("certify_global") {
  std::mt19937_64 rng(3);
  const auto good = IdentificationProblem::llo(corollary_dataset(rng, 2, 6, 3, 0.5, {0.2, 0.4}));
  const auto cert = certify_global(good, 5);
  CHECK(cert.points.size() == 125);
  CHECK(cert.all_pass);
  CHECK(cert.verdict == "hypotheses hold on sampled grid");

  const auto bad = IdentificationProblem::llo(constant_dataset(6));
  const auto cb = certify_global(bad, 5);
  CHECK_FALSE(cb.all_pass);
  for (const auto& pt : cb.points) CHECK_FALSE(pt.independence_ok);

  const auto one = certify_global(good, 1);
  REQUIRE(one.points.size() == 1);
  const auto [cb_beta, cb_theta] = good.box.center();
  const auto c = check_conditions(good, cb_beta, cb_theta);
  CHECK(one.points[0].d_residual == c.d_residual);
  CHECK(one.points[0].beta == cb_beta);

  // Output order does not depend on the thread count.
  const auto serial = certify_global(good, 4, 1);
  const auto parallel = certify_global(good, 4, 8);
  REQUIRE(serial.points.size() == parallel.points.size());
  for (std::size_t i = 0; i < serial.points.size(); ++i) {
    CHECK(serial.points[i].beta == parallel.points[i].beta);
    CHECK(serial.points[i].d_residual == parallel.points[i].d_residual);
  }
  CHECK_THROWS_AS(certify_global(good, 101), DomainError);
  CHECK_THROWS_AS(certify_global(good, 0), DomainError);
}

TEST_CASE("parameter box validation") {
  Dataset ds = constant_dataset(3);
  CHECK_THROWS_AS(IdentificationProblem::llo(ds, Link::exponential(), ParameterBox::uniform(2, 1.0, -1.0, {0.1}, {1.0})),
                  DomainError);
  CHECK_THROWS_AS(IdentificationProblem::llo(ds, Link::exponential(), ParameterBox::uniform(3, -1.0, 1.0, {0.1}, {1.0})),
                  DimensionError);
  const auto box = ParameterBox::uniform(2, -1.0, 1.0, {0.1}, {1.0});
  CHECK(box.contains(std::vector<double>{0.0, 0.5}, std::vector<double>{0.5}));
  CHECK_FALSE(box.contains(std::vector<double>{0.0, 1.5}, std::vector<double>{0.5}));
}

TEST_CASE("vector-θ model: blocks and conditions") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> x(-1.0, 1.0), n(0.1, 0.9);
  auto model = std::make_shared<CubicLogit>();
  const std::vector<double> beta{0.3, -0.2}, theta{0.7, 0.05};
  Dataset ds;
  for (int g = 0; g < 6; ++g) {
    const std::vector<double> xp{x(rng), x(rng)};
    for (int k = 0; k < 4; ++k) {
      InteractionRecord r;
      r.xp.values = xp;
      r.n = n(rng);
      r.y = model->value(beta[0] * xp[0] + beta[1] * xp[1], theta, r.n);
      ds.records.push_back(r);
    }
  }
  IdentificationProblem p{ds, model, ParameterBox::uniform(2, -1, 1, {0.1, 0.0}, {1.0, 0.1})};
  const auto J = assemble_jacobian(p, beta, theta);
  CHECK(J.Theta.cols() == 2);
  for (Eigen::Index r = 0; r < J.X.rows(); ++r) {
    const auto& rec = ds.records[static_cast<std::size_t>(r)];
    const double u = beta[0] * rec.xp.values[0] + beta[1] * rec.xp.values[1];
    for (int k = 0; k < 2; ++k) {
      const double fd = oracle::central_difference(
          [&](double v) {
            std::vector<double> t = theta;
            t[static_cast<std::size_t>(k)] = v;
            return model->value(u, t, rec.n);
          },
          theta[static_cast<std::size_t>(k)]);
      CHECK(std::abs(J.Theta(r, k) - fd) <= 1e-5 * std::max(std::abs(fd), 1e-4));
    }
  }
  const auto c = check_conditions(p, beta, theta);
  CHECK(c.rank_ok);
  CHECK(c.independence_ok);
  CHECK_FALSE(c.perpendicular_ok);
  CHECK_THROWS_AS(fit(p), DomainError);
  CHECK(certify_global(p, 2).points.size() == 16);
}
