#include "doctest.h"

#include <cmath>

#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"
#include "mixim/model.hpp"

using namespace mixim;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ModelParams two_component_params() {
  ModelParams p;
  p.mixing.log_u = VectorXd::Zero(2);
  p.mixing.log_u[1] = std::log(3.0);
  p.mixing.alpha = MatrixXd::Zero(2, 1);
  p.mixing.alpha(1, 0) = 0.7;
  ComponentParams a{VectorXd::Zero(3), MatrixXd::Zero(3, 1), MatrixXd::Identity(3, 3)};
  ComponentParams b = a;
  b.b << 1.0, -2.0, 0.5;
  b.B << 0.3, 0.0, -1.0;
  b.sigma << 2.0, 0.6, 0.2, 0.6, 1.5, -0.3, 0.2, -0.3, 1.0;
  p.components = {a, b};
  return p;
}

}  // namespace

TEST_CASE("mixing probabilities form a simplex and follow the logit gate") {
  const auto params = two_component_params();
  VectorXd x(1);
  x << 2.0;
  const VectorXd pr = mixing_probs(params.mixing, x);
  CHECK(pr.sum() == doctest::Approx(1.0));
  // Odds of component 1 over the reference: u_1 exp(x alpha_1).
  CHECK(pr[1] / pr[0] == doctest::Approx(3.0 * std::exp(1.4)));
  ModelParams huge = params;
  huge.mixing.alpha(1, 0) = 500.0;
  const VectorXd ph = mixing_probs(huge.mixing, x);
  CHECK(ph.allFinite());
  CHECK(ph[1] == doctest::Approx(1.0));
}

TEST_CASE("missing-given-observed conditional matches the precision-matrix form") {
  const auto params = two_component_params();
  const auto& comp = params.components[1];
  VectorXd x(1);
  x << -0.4;
  const std::vector<int> obs{0, 2}, mis{1};
  VectorXd y_obs(2);
  y_obs << 0.9, 1.7;
  const auto cond = component_mis_conditional(comp, x, y_obs, obs, mis);

  // Independent route: Lambda = Sigma^{-1}; cov = Lambda_mm^{-1}; mean = mu_m - Lambda_mm^{-1} Lambda_mo (y_o - mu_o).
  const MatrixXd lambda = comp.sigma.inverse();
  const VectorXd mu = comp.b + comp.B * x;
  const double lmm = lambda(1, 1);
  const double mean = mu[1] - (lambda(1, 0) * (y_obs[0] - mu[0]) + lambda(1, 2) * (y_obs[1] - mu[2])) / lmm;
  CHECK(cond.mean[0] == doctest::Approx(mean));
  CHECK(cond.cov(0, 0) == doctest::Approx(1.0 / lmm));

  // Affine in y_obs with slope Sigma_mo Sigma_oo^{-1}.
  VectorXd shifted = y_obs;
  shifted[0] += 1.0;
  const auto cond2 = component_mis_conditional(comp, x, shifted, obs, mis);
  const MatrixXd soo = comp.sigma(obs, obs);
  const MatrixXd gain = comp.sigma(mis, obs) * soo.inverse();
  CHECK(cond2.mean[0] - cond.mean[0] == doctest::Approx(gain(0, 0)));

  // No observed coordinates: the marginal.
  const std::vector<int> all{0, 1, 2}, none{};
  const auto marg = component_mis_conditional(comp, x, VectorXd(), none, all);
  CHECK(marg.mean.isApprox(mu));
  CHECK(marg.cov.isApprox(comp.sigma));
}

TEST_CASE("component posterior equals Bayes rule on the observed marginals") {
  const auto params = two_component_params();
  VectorXd x(1);
  x << 0.5;
  const std::vector<int> obs{1};
  VectorXd y_obs(1);
  y_obs << -1.2;
  const VectorXd w = component_posterior(params, x, y_obs, obs);
  const VectorXd prior = mixing_probs(params.mixing, x);
  double lik[2];
  for (int g = 0; g < 2; ++g) {
    const auto& c = params.components[g];
    const double m = (c.b + c.B * x)[1];
    lik[g] = std::exp(normal_logpdf(-1.2, m, c.sigma(1, 1)));
  }
  const double z = prior[0] * lik[0] + prior[1] * lik[1];
  CHECK(w[0] == doctest::Approx(prior[0] * lik[0] / z));
  CHECK(w[1] == doctest::Approx(prior[1] * lik[1] / z));
  // Nothing observed: the gate alone.
  CHECK(component_posterior(params, x, VectorXd(), {}).isApprox(prior));
}

TEST_CASE("row log-likelihood is the log of the mixture density") {
  const auto params = two_component_params();
  VectorXd x(1);
  x << 1.0;
  const std::vector<int> obs{0, 1};
  VectorXd y(2);
  y << 0.2, -0.1;
  const VectorXd prior = mixing_probs(params.mixing, x);
  double dens = 0.0;
  for (int g = 0; g < 2; ++g) {
    const auto& c = params.components[g];
    dens += prior[g] * std::exp(gaussian_logpdf(y, (c.b + c.B * x)(obs), MatrixXd(c.sigma(obs, obs))));
  }
  CHECK(row_loglik_obs(params, x, y, obs) == doctest::Approx(std::log(dens)));
  CHECK(row_loglik_obs(params, x, VectorXd(), {}) == 0.0);
}

TEST_CASE("impute_row with a degenerate gate draws from the chosen component") {
  auto params = two_component_params();
  params.mixing.log_u[1] = -200.0;
  RngStream rng(4, 0);
  VectorXd x(1);
  x << 0.0;
  const std::vector<int> obs{}, mis{0, 1, 2};
  VectorXd acc = VectorXd::Zero(3);
  const int n = 20000;
  for (int i = 0; i < n; ++i) acc += impute_row(params, x, VectorXd(), obs, mis, rng);
  CHECK((acc / n).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("log_sum_exp is stable") {
  VectorXd v(3);
  v << 1000.0, 1000.0, -1e300;
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("parameter validation and JSON round trip") {
  auto params = two_component_params();
  CHECK_NOTHROW(params.validate());
  const auto back = model_params_from_json(to_json(params));
  CHECK(back.components[1].sigma == params.components[1].sigma);
  CHECK(back.mixing.alpha == params.mixing.alpha);
  params.mixing.log_u[0] = 0.5;
  CHECK_THROWS_AS(params.validate(true), ValidationError);
  params = two_component_params();
  params.components[1].sigma(0, 0) = -1.0;
  CHECK_THROWS_AS(params.validate(), ValidationError);
  CHECK_THROWS_AS(model_params_from_json(nlohmann::json{{"G", 2}}), ValidationError);
}

TEST_CASE("prior defaults and validation") {
  auto prior = PriorConfig::defaults(7, 2, 3);
  CHECK(prior.a == doctest::Approx(1.0 / 7.0));
  CHECK_NOTHROW(prior.validate(2, 3));
  CHECK(prior.coefficient_col_cov()(0, 0) == prior.s_b);
  prior.nu = 0.5;
  CHECK_THROWS_AS(prior.validate(2, 3), ValidationError);
  prior = PriorConfig::defaults(7, 2, 3);
  prior.a = 0.0;
  CHECK_THROWS_AS(prior.validate(2, 3), ValidationError);
  prior = PriorConfig::defaults(7, 2, 3);
  CHECK_THROWS_AS(prior.validate(3, 3), ValidationError);
}
