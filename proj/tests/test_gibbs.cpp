#include "doctest.h"

#include <cmath>
#include <memory>

#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"
#include "mixim/gibbs.hpp"
#include "mixim/stats.hpp"
#include "mixim/verification.hpp"

using namespace mixim;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset synthetic(Index n, Index p, Index q, double missing_prob, std::uint64_t seed, bool binary_last = false) {
  RngStream rng(seed, 0);
  Dataset d;
  d.x.resize(n, q);
  d.y.resize(n, p);
  d.delta = Mask::Ones(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < q; ++j) d.x(i, j) = rng.normal();
    const double shift = d.x(i, 0) > 0 ? 2.0 : -1.0;
    for (Index k = 0; k < p; ++k) d.y(i, k) = shift + 0.5 * d.x(i, 0) * (k + 1) + rng.normal();
  }
  for (Index k = 0; k < p; ++k) {
    d.kinds.push_back(VariableKind::continuous());
    d.y_names.push_back("y" + std::to_string(k + 1));
  }
  for (Index j = 0; j < q; ++j) d.x_names.push_back("x" + std::to_string(j + 1));
  if (binary_last) {
    d.kinds.back() = VariableKind::binary();
    for (Index i = 0; i < n; ++i) d.y(i, p - 1) = d.y(i, p - 1) > 0.5 ? 1.0 : 0.0;
  }
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < p; ++k) {
      if (rng.uniform() < missing_prob) {
        d.delta(i, k) = 0;
        d.y(i, k) = std::nan("");
      }
    }
  }
  d.validate();
  return d;
}

ChainState make_state(const Dataset& d, int G, const PriorConfig& prior, std::uint64_t seed, bool standardize = false) {
  ChainConfig cfg;
  cfg.standardize = standardize;
  auto cd = std::make_shared<const ChainData>(ChainData::from_dataset(d, standardize));
  return init_state(cd, G, prior, cfg, RngStream(seed, 1));
}

}  // namespace

TEST_CASE("non-null count") {
  CHECK(non_null_count(std::vector<int>{0, 0, 0}, 7) == 1);
  CHECK(non_null_count(std::vector<int>{0, 1, 1, 4}, 7) == 3);
  CHECK(non_null_count(std::vector<int>{}, 7) == 0);
}

TEST_CASE("u acceptance ratio") {
  CHECK(u_log_acceptance_ratio(-1.3, -1.3, 0.2) == 0.0);
  // target a t - e^t against the normal approximation with log-gamma moments
  const double a = 0.5, s = 0.4, t = -2.0;
  const auto m = log_gamma_moments(a);
  const double expected = (a * s - std::exp(s)) - (a * t - std::exp(t)) -
                          (normal_logpdf(s, m.mean, m.variance) - normal_logpdf(t, m.mean, m.variance));
  CHECK(u_log_acceptance_ratio(s, t, a) == doctest::Approx(expected));
}

TEST_CASE("chain config validation") {
  ChainConfig c;
  CHECK_NOTHROW(c.validate());
  c.m_imputations = c.keep + 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = ChainConfig{};
  c.burn_in = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(parse_init_strategy(to_string(InitStrategy::KMeans)) == InitStrategy::KMeans);
  CHECK_THROWS_AS(parse_init_strategy("spectral"), ValidationError);
}

TEST_CASE("initial state satisfies the type invariants for every strategy") {
  const auto d = synthetic(60, 2, 2, 0.3, 1, true);
  const auto prior = PriorConfig::defaults(4, 2, 2);
  for (auto init : {InitStrategy::Single, InitStrategy::KMeans, InitStrategy::Random}) {
    ChainConfig cfg;
    cfg.init = init;
    auto cd = std::make_shared<const ChainData>(ChainData::from_dataset(d, true));
    const auto st = init_state(cd, 4, prior, cfg, RngStream(3, 0));
    CHECK_NOTHROW(st.check_invariants());
    CHECK(st.params.mixing.log_u.isZero());
    CHECK(st.params.mixing.alpha.isZero());
    const auto again = init_state(cd, 4, prior, cfg, RngStream(3, 0));
    CHECK(again.z == st.z);
    CHECK(again.y_star == st.y_star);
  }
}

TEST_CASE("sweeps keep observed cells and latent intervals intact") {
  const auto d = synthetic(80, 3, 2, 0.25, 2, true);
  const auto prior = PriorConfig::defaults(5, 3, 2);
  auto st = make_state(d, 5, prior, 4, true);
  const MatrixXd observed_before = st.y_star;
  for (int t = 0; t < 30; ++t) {
    sweep(st, prior);
    REQUIRE_NOTHROW(st.check_invariants());
    REQUIRE(st.params.mixing.log_u[0] == 0.0);
    REQUIRE(st.params.mixing.alpha.row(0).isZero(0.0));
    REQUIRE((st.params.mixing.log_u.array() < 2.0).all());
  }
  for (Index i = 0; i < d.n(); ++i)
    for (Index k = 0; k < 2; ++k)
      if (d.observed(i, k)) CHECK(st.y_star(i, k) == observed_before(i, k));
  CHECK(st.iteration == 30);
  CHECK(std::isfinite(st.last_loglik));
}

TEST_CASE("regression update matches the vectorized conjugate posterior") {
  const Index n = 20, p = 2, q = 2, k = q + 1;
  auto d = synthetic(n, p, q, 0.0, 5);
  PriorConfig prior = PriorConfig::defaults(1, p, q);
  prior.s_b2 << 1.0, 0.3, 0.3, 2.0;
  auto st = make_state(d, 1, prior, 6);
  MatrixXd sigma(p, p);
  sigma << 1.5, -0.4, -0.4, 0.8;
  st.params.components[0].sigma = sigma;

  // Brute force on vec(W), W = [b, B] (p x k), prior Cov = D kron S_B2.
  MatrixXd D = MatrixXd::Zero(k, k);
  D(0, 0) = prior.s_b;
  D.bottomRightCorner(q, q) = prior.s_b1;
  MatrixXd prior_cov(p * k, p * k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) prior_cov.block(a * p, b * p, p, p) = D(a, b) * prior.s_b2;
  MatrixXd precision = prior_cov.inverse();
  VectorXd linear = VectorXd::Zero(p * k);
  const MatrixXd sigma_inv = sigma.inverse();
  for (Index i = 0; i < n; ++i) {
    VectorXd xt(k);
    xt << 1.0, d.x.row(i).transpose();
    for (Index a = 0; a < k; ++a) {
      linear.segment(a * p, p) += xt[a] * sigma_inv * d.y.row(i).transpose();
      for (Index b = 0; b < k; ++b) precision.block(a * p, b * p, p, p) += xt[a] * xt[b] * sigma_inv;
    }
  }
  const MatrixXd post_cov = precision.inverse();
  const VectorXd post_mean = post_cov * linear;

  const int N = 100000;
  VectorXd sum = VectorXd::Zero(p * k), sumsq = VectorXd::Zero(p * k);
  for (int t = 0; t < N; ++t) {
    update_regression(st, prior);
    const auto& c = st.params.components[0];
    VectorXd v(p * k);
    v << c.b, Eigen::Map<const VectorXd>(c.B.data(), p * q);
    sum += v;
    sumsq += v.cwiseProduct(v);
  }
  const VectorXd mean = sum / N;
  const VectorXd var = sumsq / N - mean.cwiseProduct(mean);
  for (Index j = 0; j < p * k; ++j) {
    CHECK(std::abs(mean[j] - post_mean[j]) < 3.0 * std::sqrt(post_cov(j, j) / N));
    CHECK(var[j] == doctest::Approx(post_cov(j, j)).epsilon(0.03));
  }
}

TEST_CASE("empty component draws its coefficients from the prior") {
  auto d = synthetic(30, 1, 1, 0.0, 7);
  PriorConfig prior = PriorConfig::defaults(2, 1, 1);
  auto st = make_state(d, 2, prior, 8);
  std::fill(st.z.begin(), st.z.end(), 0);
  st.params.components[1].sigma(0, 0) = 2.0;
  const int N = 50000;
  double s = 0.0, ss = 0.0;
  for (int t = 0; t < N; ++t) {
    update_regression(st, prior);
    const double b = st.params.components[1].b[0];
    s += b;
    ss += b * b;
  }
  CHECK(std::abs(s / N) < 4.0 * std::sqrt(prior.s_b / N));
  CHECK(ss / N == doctest::Approx(prior.s_b * prior.s_b2(0, 0)).epsilon(0.03));
}

TEST_CASE("sigma update matches the inverse-Wishart posterior mean") {
  const Index n = 40, p = 2;
  auto d = synthetic(n, p, 1, 0.0, 9);
  PriorConfig prior = PriorConfig::defaults(1, p, 1);
  auto st = make_state(d, 1, prior, 10);
  const auto& c = st.params.components[0];
  MatrixXd S = prior.s_sigma;
  for (Index i = 0; i < n; ++i) {
    const VectorXd r = d.y.row(i).transpose() - c.b - c.B * d.x.row(i).transpose();
    S += r * r.transpose();
  }
  const MatrixXd target = S / (prior.nu + n - p - 1.0);
  const int N = 50000;
  MatrixXd acc = MatrixXd::Zero(p, p);
  for (int t = 0; t < N; ++t) {
    update_sigma(st, prior);
    acc += st.params.components[0].sigma;
  }
  CHECK(((acc / N) - target).cwiseAbs().maxCoeff() < 0.02 * target.cwiseAbs().maxCoeff());
}

TEST_CASE("allocation frequencies follow the component posterior") {
  auto d = synthetic(5, 2, 1, 0.4, 11);
  PriorConfig prior = PriorConfig::defaults(3, 2, 1);
  auto st = make_state(d, 3, prior, 12);
  st.params.mixing.log_u << 0.0, -0.5, 0.8;
  st.params.mixing.alpha << 0.0, 1.0, -0.7;
  st.params.components[1].b << 1.0, 1.0;
  st.params.components[2].b << -1.0, 2.0;
  const int N = 60000;
  MatrixXd freq = MatrixXd::Zero(d.n(), 3);
  for (int t = 0; t < N; ++t) {
    update_z(st);
    for (Index i = 0; i < d.n(); ++i) freq(i, st.z[static_cast<std::size_t>(i)]) += 1.0;
  }
  freq /= N;
  for (Index i = 0; i < d.n(); ++i) {
    const auto pat = split_pattern(d, i);
    const VectorXd y_obs = d.y.row(i)(pat.obs).transpose();
    const VectorXd w = component_posterior(st.params, d.x.row(i).transpose(), y_obs, pat.obs);
    for (int g = 0; g < 3; ++g) CHECK(std::abs(freq(i, g) - w[g]) < 4.0 * std::sqrt(w[g] * (1 - w[g]) / N) + 1e-9);
  }
}

TEST_CASE("missing-value update draws from the within-component conditional") {
  auto d = synthetic(3, 2, 1, 0.0, 13);
  d.delta(0, 1) = 0;
  d.y(0, 1) = std::nan("");
  PriorConfig prior = PriorConfig::defaults(1, 2, 1);
  auto st = make_state(d, 1, prior, 14);
  st.params.components[0].sigma << 1.0, 0.8, 0.8, 2.0;
  const std::vector<int> obs{0}, mis{1};
  VectorXd y_obs(1);
  y_obs << d.y(0, 0);
  const auto cond =
      component_mis_conditional(st.params.components[0], d.x.row(0).transpose(), y_obs, obs, mis);
  const int N = 100000;
  std::vector<double> draws(N);
  for (auto& v : draws) {
    update_ymis(st);
    v = st.y_star(0, 1);
  }
  CHECK(std::abs(stats::mean(draws) - cond.mean[0]) < 4.0 * std::sqrt(cond.cov(0, 0) / N));
  CHECK(stats::variance(draws) == doctest::Approx(cond.cov(0, 0)).epsilon(0.02));
}

TEST_CASE("run_chain output shape, determinism and completeness") {
  const auto d = synthetic(50, 2, 2, 0.3, 15, true);
  const auto prior = PriorConfig::defaults(4, 2, 2);
  ChainConfig cfg;
  cfg.burn_in = 20;
  cfg.keep = 40;
  cfg.thin = 2;
  cfg.m_imputations = 4;
  const auto a = run_chain(d, 4, prior, cfg, RngStream(21, 0));
  const auto b = run_chain(d, 4, prior, cfg, RngStream(21, 0));
  const auto c = run_chain(d, 4, prior, cfg, RngStream(22, 0));
  REQUIRE(a.draws.m() == 4);
  CHECK(a.draws.source_iterations == std::vector<long>{30, 40, 50, 60});
  CHECK(a.diagnostics.loglik.size() == 60);
  CHECK(a.draws.datasets[3].y == b.draws.datasets[3].y);
  CHECK(a.draws.datasets[3].y != c.draws.datasets[3].y);
  for (const auto& ds : a.draws.datasets) {
    CHECK(ds.missing_count() == 0);
    for (Index i = 0; i < d.n(); ++i) {
      if (d.observed(i, 0)) CHECK(ds.y(i, 0) == d.y(i, 0));
      CHECK((ds.y(i, 1) == 0.0 || ds.y(i, 1) == 1.0));
    }
  }
  CHECK(a.diagnostics.mean_non_null_kept >= 1.0);
  CHECK(a.diagnostics.mean_non_null_kept <= 4.0);
  ChainConfig minimal;
  minimal.burn_in = 0;
  minimal.keep = 1;
  minimal.m_imputations = 1;
  CHECK(run_chain(d, 2, PriorConfig::defaults(2, 2, 2), minimal, RngStream(1, 0)).draws.m() == 1);
}

TEST_CASE("standardization maps imputations back to the input scale") {
  auto d = synthetic(120, 1, 1, 0.2, 16);
  d.x *= 1000.0;
  for (Index i = 0; i < d.n(); ++i)
    if (d.observed(i, 0)) d.y(i, 0) = 500.0 + 100.0 * d.y(i, 0);
  const auto cd = ChainData::from_dataset(d, true);
  CHECK(cd.x.col(0).mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(cd.to_response(0, 0.0) == doctest::Approx(cd.y_center[0]));
  ChainConfig cfg;
  cfg.burn_in = 50;
  cfg.keep = 100;
  cfg.m_imputations = 1;
  const auto r = run_chain(d, 3, PriorConfig::defaults(3, 1, 1), cfg, RngStream(5, 0));
  double s = 0.0;
  int m = 0;
  for (Index i = 0; i < d.n(); ++i)
    if (!d.observed(i, 0)) s += r.draws.datasets[0].y(i, 0), ++m;
  CHECK(s / m > 200.0);
  CHECK(s / m < 800.0);
}

TEST_CASE("imputation sources") {
  const auto complete = synthetic(10, 2, 1, 0.0, 17);
  CompleteDataSource cs(complete);
  RngStream rng(1, 0);
  CHECK(cs.next(rng) == complete.y);
  const auto holes = synthetic(10, 2, 1, 0.3, 18);
  CHECK_THROWS_AS(CompleteDataSource{holes}, ValidationError);

  ImputationDraws draws;
  draws.datasets = {complete, complete};
  PrecollectedSource ps(draws);
  ps.next(rng);
  ps.next(rng);
  CHECK_THROWS_AS(ps.next(rng), ValidationError);

  const auto prior = PriorConfig::defaults(2, 2, 1);
  ChainConfig cfg;
  cfg.burn_in = 5;
  ChainSource chain(holes, 2, prior, cfg, 3, RngStream(2, 0));
  const MatrixXd y1 = chain.next(rng), y2 = chain.next(rng);
  CHECK(y1.allFinite());
  CHECK(y1 != y2);

  auto st = make_state(holes, 2, prior, 3);
  FixedParamsSource fs(st, holes);
  const MatrixXd f = fs.next(rng);
  CHECK(f.allFinite());
}

TEST_CASE("kappa sign fault is caught by the joint-distribution test") {
  VerificationOptions opts;
  opts.fault.alpha_kappa_sign = true;
  CHECK_FALSE(check_geweke(opts).passed());
  opts.fault.alpha_kappa_sign = false;
  CHECK(check_geweke(opts).passed());
}
