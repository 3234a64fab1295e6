#include <doctest.h>

#include <cmath>
#include <random>

#include "ideolens/beta_regression.hpp"
#include "ideolens/error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace ideolens;
using Eigen::VectorXd;

TEST_CASE("conditional log-likelihood matches the density and its gradient") {
  test::SimParams sim;
  sim.n = 300;
  sim.with_factors = false;
  const auto d = test::simulate(sim, 4);
  const VectorXd beta = (VectorXd(2) << -0.7, 0.5).finished();
  const double log_phi = std::log(18.0);
  const VectorXd off = VectorXd::Zero(d.y.size());
  VectorXd g;
  const double ll = beta_loglik(d.y, d.X, beta, log_phi, off, &g);
  CHECK(ll == doctest::Approx(oracle::fixed_loglik(d.y, d.X, beta, 18.0)).epsilon(1e-12));

  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    VectorXd bp = beta, bm = beta;
    double lp = log_phi, lm = log_phi;
    if (k < 2) {
      bp[k] += h;
      bm[k] -= h;
    } else {
      lp += h;
      lm -= h;
    }
    const double fd = (beta_loglik(d.y, d.X, bp, lp, off) - beta_loglik(d.y, d.X, bm, lm, off)) /
                      (2 * h);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("Laplace objective gradient agrees with central differences") {
  test::SimParams sim;
  sim.n = 1000;
  sim.items = 25;
  sim.names = 20;
  sim.sd_item = 0.3;
  sim.sd_name = 0.2;
  const auto d = test::simulate(sim, 11);
  LaplaceBetaModel model(d);
  REQUIRE(model.dimension() == 5);

  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int point = 0; point < 5; ++point) {
    VectorXd theta(5);
    theta << -1.0 + 0.3 * u(gen), 0.8 + 0.3 * u(gen), std::log(25.0) + 0.5 * u(gen),
        std::log(0.3) + 0.7 * u(gen), std::log(0.2) + 0.7 * u(gen);
    VectorXd g;
    model.value(theta, &g);
    VectorXd fd(5);
    for (int k = 0; k < 5; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[k]));
      VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      fd[k] = (model.value(tp) - model.value(tm)) / (2 * h);
    }
    CHECK((g - fd).norm() / fd.norm() < 1e-4);
  }
}

TEST_CASE("inactive factors drop their parameter") {
  test::SimParams sim;
  sim.n = 200;
  sim.items = 10;
  sim.names = 5;
  const auto d = test::simulate(sim, 1);
  LaplaceBetaModel model(d);
  CHECK(model.dimension() == 5);
  model.set_active(0, false);
  CHECK(model.dimension() == 4);
  CHECK_FALSE(model.active(0));
  model.set_active(1, false);
  CHECK(model.dimension() == 3);
}

TEST_CASE("fixed-effect recovery without random effects") {
  test::SimParams sim;
  sim.with_factors = false;
  const auto d = test::simulate(sim, 2024);
  const auto fit = fit_beta_regression(d);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.coefficient("(Intercept)").estimate + 1.0) < 0.05);
  CHECK(std::abs(fit.coefficient("x").estimate - 0.8) < 0.05);
  CHECK(std::abs(fit.dispersion_phi / 25.0 - 1.0) < 0.15);
  CHECK(fit.mu_link == "logit");
  CHECK(fit.random_intercept_variances.empty());
}

TEST_CASE("mixed recovery with crossed intercepts") {
  test::SimParams sim;
  sim.sd_item = 0.3;
  sim.sd_name = 0.2;
  const auto d = test::simulate(sim, 7);
  const auto fit = fit_beta_regression(d);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.coefficient("(Intercept)").estimate + 1.0) < 0.1);
  CHECK(std::abs(fit.coefficient("x").estimate - 0.8) < 0.1);
  CHECK(std::abs(fit.dispersion_phi / 25.0 - 1.0) < 0.2);
  REQUIRE(fit.random_intercept_variances.size() == 2);
  CHECK(fit.random_intercept_variances[0].factor == "item");
  CHECK(std::sqrt(fit.random_intercept_variances[0].variance) == doctest::Approx(0.3).epsilon(0.35));
  CHECK(std::sqrt(fit.random_intercept_variances[1].variance) == doctest::Approx(0.2).epsilon(0.5));
  const auto& x = fit.coefficient("x");
  CHECK(x.std_error > 0.0);
  CHECK(x.z == doctest::Approx(x.estimate / x.std_error));
  CHECK(x.p_value < 1e-10);
}

TEST_CASE("a zero-variance factor is reported at the boundary") {
  test::SimParams sim;
  sim.n = 2000;
  sim.sd_item = 0.4;
  sim.sd_name = 0.0;
  const auto d = test::simulate(sim, 9);
  const auto fit = fit_beta_regression(d);
  CHECK(fit.converged);
  REQUIRE(fit.random_intercept_variances.size() == 2);
  CHECK(fit.random_intercept_variances[0].variance > 0.05);
  // the estimate may be tiny rather than exactly zero, but never large
  CHECK(fit.random_intercept_variances[1].variance < 0.01);
  if (fit.random_intercept_variances[1].at_boundary)
    CHECK(fit.random_intercept_variances[1].variance == 0.0);
}

TEST_CASE("pinned variances reproduce an independent fixed-effects fit") {
  test::SimParams sim;
  sim.n = 1500;
  sim.sd_item = 0.3;
  sim.sd_name = 0.2;
  const auto d = test::simulate(sim, 31);
  FitOptions opts;
  opts.pin_variances_to_zero = true;
  const auto fit = fit_beta_regression(d, opts);
  const auto ref = oracle::fit_fixed(d.y, d.X);
  REQUIRE(fit.converged);
  REQUIRE(ref.converged);
  CHECK(std::abs(fit.coefficient("(Intercept)").estimate - ref.beta[0]) < 1e-6);
  CHECK(std::abs(fit.coefficient("x").estimate - ref.beta[1]) < 1e-6);
  CHECK(fit.dispersion_phi == doctest::Approx(ref.phi).epsilon(1e-6));
  for (const auto& v : fit.random_intercept_variances) {
    CHECK(v.variance == 0.0);
    CHECK(v.at_boundary);
  }
}

TEST_CASE("constant response at one half gives zero coefficients") {
  test::SimParams sim;
  sim.n = 200;
  sim.with_factors = false;
  auto d = test::simulate(sim, 5);
  d.y.setConstant(0.5);
  const auto fit = fit_beta_regression(d);
  CHECK(std::abs(fit.coefficient("(Intercept)").estimate) < 1e-6);
  CHECK(std::abs(fit.coefficient("x").estimate) < 1e-6);
}

TEST_CASE("invalid inputs are rejected") {
  test::SimParams sim;
  sim.n = 200;
  sim.items = 10;
  sim.names = 5;
  auto d = test::simulate(sim, 5);

  auto bad_y = d;
  bad_y.y[3] = 1.0;
  CHECK_THROWS_AS(fit_beta_regression(bad_y), StatsError);

  auto rank = d;
  rank.X.conservativeResize(Eigen::NoChange, 3);
  rank.X.col(2) = 2.0 * rank.X.col(1);
  rank.predictors.push_back("x2");
  CHECK_THROWS_AS(fit_beta_regression(rank), StatsError);

  auto single = d;
  const std::vector<std::string> same(d.y.size(), "only");
  single.factors[1] = make_factor("name", same);
  CHECK_THROWS_AS(fit_beta_regression(single), StatsError);

  auto names = d;
  names.predictors.pop_back();
  CHECK_THROWS_AS(fit_beta_regression(names), StatsError);
  CHECK_THROWS_AS(fit_beta_regression(d).coefficient("nope"), StatsError);
}

TEST_CASE("condition coding") {
  const auto direct = ConditionCode::from(WayOfAsking::direct(), PreambleGroup::Null);
  CHECK(direct.values() == std::array<double, 6>{0, 0, 0, 0, 0, 0});
  const auto br = ConditionCode::from(WayOfAsking::indirect(Adjective::Best, Verb::Refer),
                                      PreambleGroup::IdeologyDeclaration);
  CHECK(br.values() == std::array<double, 6>{1, 1, 1, 0, 0, 1});
  const auto lc = ConditionCode::from(WayOfAsking::indirect(Adjective::Likely, Verb::Complete),
                                      PreambleGroup::Choices);
  CHECK(lc.values() == std::array<double, 6>{1, 0, 0, 1, 0, 0});
  CHECK_THROWS_AS(ConditionCode::make(false, true, false, false, false, false), ValidationError);
  CHECK_THROWS_AS(ConditionCode::make(true, false, false, true, true, false), ValidationError);
  CHECK(ConditionCode::predictor_names() ==
        std::vector<std::string>{"indirect", "best", "refer", "choices", "ind_dec", "ideo_dec"});

  const std::vector<double> y{0.2, 0.4};
  const std::vector<ConditionCode> codes{direct, br};
  const std::vector<std::string> items{"a", "b"}, names{"Casey", "Alex"};
  const auto design = condition_design(y, codes, items, names);
  CHECK(design.X.cols() == 7);
  CHECK(design.predictors.front() == "(Intercept)");
  CHECK(design.X(1, 0) == 1.0);
  CHECK(design.X(1, 6) == 1.0);
  REQUIRE(design.factors.size() == 2);
  CHECK(design.factors[0].name == "item");
  CHECK(design.factors[1].name == "name");
}
