#include "mixim/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"
#include "mixim/stats.hpp"

namespace mixim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

CheckResult within(const std::string& name, double value, double target, double tol) {
  const bool ok = std::abs(value - target) <= tol;
  return {name, ok, fmt("value %.6g target %.6g tol %.3g", value, target, tol)};
}

CheckResult ks_check(const std::string& name, stats::KsResult ks, double min_p) {
  return {name, ks.p_value > min_p, fmt("D %.4g p %.4g (need > %.3g)", ks.statistic, ks.p_value, min_p)};
}

struct Moments {
  double mean = 0.0, var = 0.0, m4 = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.mean = stats::mean(v);
  for (double x : v) {
    const double d = x - m.mean;
    m.var += d * d;
    m.m4 += d * d * d * d;
  }
  m.var /= static_cast<double>(v.size() - 1);
  m.m4 /= static_cast<double>(v.size());
  return m;
}

// Mean and variance of N(0, 1) restricted to (a, b) by composite Simpson
// integration of the density, rescaled at the mode of the restricted density.
std::pair<double, double> truncated_normal_quadrature(double a, double b) {
  const double lo = std::isfinite(a) ? a : std::min(b, 0.0) - 40.0;
  const double hi = std::isfinite(b) ? b : std::max(a, 0.0) + 40.0;
  const double mode = std::clamp(0.0, lo, hi);
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = w * std::exp(-0.5 * (x * x - mode * mode));
    m0 += f;
    m1 += f * x;
    m2 += f * x * x;
  }
  const double mean = m1 / m0;
  return {mean, m2 / m0 - mean * mean};
}

double pg_laplace_product(double c, double t) {
  // E exp(-t w) for w ~ PG(1, c) from its representation as a weighted sum of Exp(1) variables.
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double prod = 1.0;
  for (int k = 1; k <= 100000; ++k) {
    const double d = (k - 0.5) * (k - 0.5) + c * c / (4.0 * pi2);
    prod *= 1.0 / (1.0 + t / (2.0 * pi2 * d));
  }
  return prod;
}

double truncated_gamma_log_draw(double a, RngStream& rng) {
  for (;;) {
    const double u = rng.gamma(a);
    if (u > 0.0 && std::log(u) < 2.0) return std::log(u);
  }
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json j{{"suite", name}, {"passed", passed()}, {"checks", nlohmann::json::array()}};
  for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return j;
}

ModelParams draw_from_prior(const PriorConfig& prior, int G, Index p, Index q, RngStream& rng) {
  ModelParams params;
  params.mixing.log_u = VectorXd::Zero(G);
  params.mixing.alpha = MatrixXd::Zero(G, q);
  for (int g = 1; g < G; ++g) {
    params.mixing.log_u[g] = truncated_gamma_log_draw(prior.a, rng);
    if (q > 0) params.mixing.alpha.row(g) = sample_gaussian(VectorXd::Zero(q), prior.s_alpha, rng).transpose();
  }
  for (int g = 0; g < G; ++g) {
    const MatrixXd w = sample_matrix_normal(MatrixXd::Zero(p, q + 1), prior.s_b2, prior.coefficient_col_cov(), rng);
    params.components.push_back({w.col(0), w.rightCols(q), sample_inverse_wishart(prior.nu, prior.s_sigma, rng)});
  }
  return params;
}

// ---------------------------------------------------------------------------

SuiteReport check_samplers(const VerificationOptions& opts) {
  SuiteReport rep{"samplers", {}};
  const long N = opts.sampler_draws;
  RngStream root(opts.seed, 101);
  auto sqrt_n = std::sqrt(static_cast<double>(N));

  // Polya-Gamma moments.
  for (double c : {0.0, 0.5, 2.0, 10.0}) {
    RngStream rng = root.substream(static_cast<std::uint64_t>(c * 100));
    std::vector<double> draws(static_cast<std::size_t>(N));
    for (auto& d : draws) d = sample_polya_gamma(c, rng);
    const auto m = moments(draws);
    const double mu = polya_gamma_mean(c), var = polya_gamma_variance(c);
    rep.checks.push_back(within(fmt("pg_mean c=%g", c), m.mean, mu, 4.0 * std::sqrt(var) / sqrt_n));
    rep.checks.push_back(within(fmt("pg_variance c=%g", c), m.var, var, 4.0 * std::sqrt(m.m4 - var * var) / sqrt_n));
  }
  {
    RngStream r1 = root.substream(1), r2 = root.substream(2);
    std::vector<double> a(100000), b(100000);
    for (auto& v : a) v = sample_polya_gamma(2.0, r1);
    for (auto& v : b) v = sample_polya_gamma(-2.0, r2);
    rep.checks.push_back(ks_check("pg_symmetry c=2 vs c=-2", stats::ks_two_sample(a, b), 0.01));
  }
  for (double c : {0.0, 1.0, 3.0}) {
    RngStream rng = root.substream(1000 + static_cast<std::uint64_t>(c));
    std::vector<double> draws(200000);
    for (auto& d : draws) d = sample_polya_gamma(c, rng);
    for (double t : {0.1, 1.0, 10.0}) {
      double s = 0.0;
      for (double w : draws) s += std::exp(-t * w);
      s /= static_cast<double>(draws.size());
      rep.checks.push_back(within(fmt("pg_laplace c=%g t=%g", c, t), s, pg_laplace_product(c, t), 1e-3));
    }
  }

  // Truncated normal.
  struct TnCase {
    double a, b;
  };
  const TnCase tn_cases[] = {{-kInf, kInf}, {0.0, kInf}, {8.0, 9.0}, {-kInf, -2.0}, {0.5, 0.7},
                             {-1.0, 3.0},   {3.0, kInf}, {-0.3, 0.2}, {1.0, 1.5},   {-12.0, -11.0}};
  int tn_id = 0;
  for (const auto& tc : tn_cases) {
    RngStream rng = root.substream(2000 + static_cast<std::uint64_t>(tn_id++));
    std::vector<double> draws(static_cast<std::size_t>(N));
    bool inside = true;
    for (auto& d : draws) {
      d = sample_truncated_normal(0.0, 1.0, {tc.a, tc.b}, rng);
      inside = inside && d > tc.a && d <= tc.b;
    }
    const auto [mu, var] = truncated_normal_quadrature(tc.a, tc.b);
    const auto m = moments(draws);
    const std::string tag = fmt("(%g, %g)", tc.a, tc.b);
    rep.checks.push_back({"tn_support " + tag, inside, inside ? "all draws inside" : "draw outside interval"});
    rep.checks.push_back(within("tn_mean " + tag, m.mean, mu, 4.0 * std::sqrt(var) / sqrt_n));
    rep.checks.push_back(within("tn_variance " + tag, m.var, var, 4.0 * std::sqrt(std::max(m.m4 - var * var, 0.0)) / sqrt_n));
  }
  {
    // Shifted and scaled: N(3, 4) on (5, inf) is 3 + 2 * TN(1, inf).
    RngStream rng = root.substream(2100);
    std::vector<double> draws(static_cast<std::size_t>(N));
    for (auto& d : draws) d = sample_truncated_normal(3.0, 4.0, {5.0, kInf}, rng);
    const auto [mu, var] = truncated_normal_quadrature(1.0, kInf);
    rep.checks.push_back(within("tn_mean location-scale", stats::mean(draws), 3.0 + 2.0 * mu, 4.0 * 2.0 * std::sqrt(var) / sqrt_n));
  }

  // Inverse Wishart.
  {
    RngStream rng = root.substream(3000);
    std::vector<double> draws(static_cast<std::size_t>(N));
    for (auto& d : draws) d = sample_inverse_wishart(5.0, MatrixXd::Constant(1, 1, 3.0), rng)(0, 0);
    // Inverse gamma(5/2, 3/2): mean 1, variance 2.
    rep.checks.push_back(within("iw_mean p=1 nu=5 scale=3", stats::mean(draws), 1.0, 0.01));
  }
  {
    RngStream rng = root.substream(3001);
    const long M = N / 5;
    MatrixXd acc = MatrixXd::Zero(2, 2);
    for (long i = 0; i < M; ++i) acc += sample_inverse_wishart(10.0, MatrixXd::Identity(2, 2), rng);
    acc /= static_cast<double>(M);
    rep.checks.push_back(within("iw_mean p=2 nu=10 (0,0)", acc(0, 0), 1.0 / 7.0, 0.02 / 7.0));
    rep.checks.push_back(within("iw_mean p=2 nu=10 (1,1)", acc(1, 1), 1.0 / 7.0, 0.02 / 7.0));
    rep.checks.push_back(within("iw_mean p=2 nu=10 (0,1)", acc(0, 1), 0.0, 0.02 / 7.0));
  }
  {
    RngStream rng = root.substream(3002);
    MatrixXd scale(3, 3);
    scale << 2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 0.5;
    bool spd = true;
    for (int i = 0; i < 1000; ++i) {
      const MatrixXd s = sample_inverse_wishart(3.5, scale, rng);
      spd = spd && s == s.transpose() && Eigen::SelfAdjointEigenSolver<MatrixXd>(s).eigenvalues().minCoeff() > 0.0;
    }
    rep.checks.push_back({"iw_spd", spd, "1000 draws symmetric with positive eigenvalues"});
  }

  // Matrix normal.
  {
    RngStream rng = root.substream(4000);
    MatrixXd cov = MatrixXd::Zero(6, 6);
    for (long i = 0; i < N; ++i) {
      const MatrixXd d = sample_matrix_normal(MatrixXd::Zero(2, 3), MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3), rng);
      const Eigen::Map<const VectorXd> v(d.data(), 6);
      cov.noalias() += v * v.transpose();
    }
    cov /= static_cast<double>(N);
    const double err = (cov - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff();
    rep.checks.push_back({"mn_identity_covariance", err <= 0.01, fmt("max abs deviation %.4g (tol 0.01)", err)});
  }
  {
    RngStream rng = root.substream(4001);
    const long M = N / 5;
    double s2 = 0.0;
    MatrixXd mean_acc = MatrixXd::Zero(2, 2);
    MatrixXd m(2, 2), u(2, 2), v(2, 2);
    m << 1.0, -2.0, 0.5, 3.0;
    u << 2.0, 0.6, 0.6, 1.0;
    v << 1.5, -0.4, -0.4, 0.8;
    RngStream rng2 = root.substream(4002);
    for (long i = 0; i < M; ++i) {
      const MatrixXd d = sample_matrix_normal(MatrixXd::Zero(2, 3), Eigen::Vector2d(1.0, 4.0).asDiagonal().toDenseMatrix(),
                                              MatrixXd::Identity(3, 3), rng);
      s2 += d.row(1).squaredNorm() / 3.0;
      mean_acc += sample_matrix_normal(m, u, v, rng2);
    }
    rep.checks.push_back(within("mn_row_variance U=diag(1,4)", s2 / static_cast<double>(M), 4.0, 0.08));
    mean_acc /= static_cast<double>(M);
    // Entry (i, j) has variance U_ii V_jj.
    double worst = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        worst = std::max(worst, std::abs(mean_acc(i, j) - m(i, j)) / std::sqrt(u(i, i) * v(j, j) / static_cast<double>(M)));
    rep.checks.push_back({"mn_mean", worst <= 4.0, fmt("max standardized deviation %.3g (tol 4)", worst)});
  }

  // Categorical.
  {
    RngStream rng = root.substream(5000);
    const double w1[] = {1.0, 0.0, 0.0};
    bool always = true;
    for (int i = 0; i < 10000; ++i) always = always && sample_categorical(w1, rng) == 0;
    rep.checks.push_back({"categorical_degenerate", always, "weights (1,0,0)"});
    const double w2[] = {1.0, 1.0};
    long hits = 0;
    for (long i = 0; i < N; ++i) hits += sample_categorical(w2, rng);
    rep.checks.push_back(within("categorical_equal", static_cast<double>(hits) / static_cast<double>(N), 0.5, 0.002));
    const double lw[] = {1000.0, 1001.0};
    hits = 0;
    for (long i = 0; i < N; ++i) hits += sample_categorical_log(lw, rng);
    rep.checks.push_back(within("categorical_log_overflow", static_cast<double>(hits) / static_cast<double>(N),
                                1.0 / (1.0 + std::exp(-1.0)), 0.002));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Geweke

namespace {

struct GewekeFixture {
  Dataset base;
  PriorConfig prior;
  int G = 2;
};

GewekeFixture geweke_fixture(bool binary, std::uint64_t seed) {
  const Index n = 20;
  GewekeFixture f;
  RngStream rng(seed, 7001);
  f.base.x.resize(n, 1);
  for (Index i = 0; i < n; ++i) f.base.x(i, 0) = rng.normal();
  f.base.y = MatrixXd::Zero(n, 1);
  f.base.delta = Mask::Ones(n, 1);
  for (Index i = 0; i < 5; ++i) {
    f.base.delta(i, 0) = 0;
    f.base.y(i, 0) = std::numeric_limits<double>::quiet_NaN();
  }
  f.base.kinds = {binary ? VariableKind::binary() : VariableKind::continuous()};
  f.base.x_names = {"x1"};
  f.base.y_names = {"y1"};
  f.prior.a = 1.0;
  f.prior.s_alpha = MatrixXd::Identity(1, 1);
  f.prior.s_b1 = MatrixXd::Identity(1, 1);
  f.prior.s_b2 = MatrixXd::Identity(1, 1);
  f.prior.s_b = 1.0;
  f.prior.nu = 5.0;
  f.prior.s_sigma = MatrixXd::Constant(1, 1, 2.0);
  return f;
}

// Redraws y* of the observed rows given (params, z) and rebuilds the data view.
void resimulate_observed(ChainState& s, Dataset& ds, RngStream& rng) {
  for (Index i = 0; i < ds.n(); ++i) {
    if (!ds.observed(i, 0)) continue;
    const auto& comp = s.params.components[static_cast<std::size_t>(s.z[static_cast<std::size_t>(i)])];
    const double mean = comp.b[0] + (comp.B * ds.x.row(i).transpose())[0];
    const double ys = mean + std::sqrt(comp.sigma(0, 0)) * rng.normal();
    s.y_star(i, 0) = ys;
    ds.y(i, 0) = ds.kinds[0].is_discrete() ? ds.kinds[0].to_response(ys) : ys;
  }
  s.data = std::make_shared<const ChainData>(ChainData::from_dataset(ds, false));
}

ChainState joint_draw(const GewekeFixture& f, Dataset& ds, RngStream rng, const FaultInjection& fault) {
  ChainState s;
  s.params = draw_from_prior(f.prior, f.G, 1, 1, rng);
  const Index n = ds.n();
  s.z.resize(static_cast<std::size_t>(n));
  s.y_star.resize(n, 1);
  for (Index i = 0; i < n; ++i) {
    const VectorXd pr = mixing_probs(s.params.mixing, ds.x.row(i).transpose());
    s.z[static_cast<std::size_t>(i)] = sample_categorical(std::span<const double>(pr.data(), 2), rng);
    const auto& comp = s.params.components[static_cast<std::size_t>(s.z[static_cast<std::size_t>(i)])];
    s.y_star(i, 0) = comp.b[0] + comp.B(0, 0) * ds.x(i, 0) + std::sqrt(comp.sigma(0, 0)) * rng.normal();
    if (ds.observed(i, 0)) ds.y(i, 0) = ds.kinds[0].is_discrete() ? ds.kinds[0].to_response(s.y_star(i, 0)) : s.y_star(i, 0);
  }
  s.data = std::make_shared<const ChainData>(ChainData::from_dataset(ds, false));
  s.omega = MatrixXd::Ones(n, f.G);
  s.rng = rng;
  s.fault = fault;
  return s;
}

const char* const kGewekeStats[] = {"log_u1", "alpha1", "b0", "b1", "B0", "B1", "log_sigma0", "log_sigma1",
                                    "n_z1", "alpha_gate_cross", "ystar_missing_mean", "ystar_observed_mean"};

std::vector<double> geweke_statistics(const ChainState& s) {
  const auto& x = s.data->x;
  double cross = 0.0, n1 = 0.0, mis = 0.0, obs = 0.0, nmis = 0.0, nobs = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const bool in1 = s.z[static_cast<std::size_t>(i)] == 1;
    n1 += in1;
    cross += x(i, 0) * (in1 ? 0.5 : -0.5);
    if (s.data->delta(i, 0)) {
      obs += s.y_star(i, 0), nobs += 1.0;
    } else {
      mis += s.y_star(i, 0), nmis += 1.0;
    }
  }
  const auto& c = s.params.components;
  return {s.params.mixing.log_u[1],
          s.params.mixing.alpha(1, 0),
          c[0].b[0],
          c[1].b[0],
          c[0].B(0, 0),
          c[1].B(0, 0),
          std::log(c[0].sigma(0, 0)),
          std::log(c[1].sigma(0, 0)),
          n1,
          s.params.mixing.alpha(1, 0) * cross,
          mis / nmis,
          obs / nobs};
}

void geweke_case(SuiteReport& rep, bool binary, const VerificationOptions& opts) {
  const auto f = geweke_fixture(binary, opts.seed);
  const std::size_t S = std::size(kGewekeStats);
  std::vector<std::vector<double>> reference(S), chains(S);
  const RngStream root(opts.seed, binary ? 7200 : 7100);
  for (long r = 0; r < opts.geweke_reference; ++r) {
    Dataset ds = f.base;
    const auto st = joint_draw(f, ds, root.substream(static_cast<std::uint64_t>(r)), {});
    const auto v = geweke_statistics(st);
    for (std::size_t k = 0; k < S; ++k) reference[k].push_back(v[k]);
  }
  for (long c = 0; c < opts.geweke_chains; ++c) {
    Dataset ds = f.base;
    ChainState st = joint_draw(f, ds, root.substream(1000000 + static_cast<std::uint64_t>(c)), opts.fault);
    for (long t = 0; t < opts.geweke_cycles; ++t) {
      sweep(st, f.prior);
      st.check_invariants();
      resimulate_observed(st, ds, st.rng);
    }
    const auto v = geweke_statistics(st);
    for (std::size_t k = 0; k < S; ++k) chains[k].push_back(v[k]);
  }
  const std::string prefix = binary ? "geweke_binary " : "geweke_continuous ";
  for (std::size_t k = 0; k < S; ++k) {
    rep.checks.push_back(ks_check(prefix + kGewekeStats[k], stats::ks_two_sample(chains[k], reference[k]), opts.geweke_min_p));
  }
}

}  // namespace

SuiteReport check_geweke(const VerificationOptions& opts) {
  SuiteReport rep{"geweke", {}};
  geweke_case(rep, false, opts);
  geweke_case(rep, true, opts);
  return rep;
}

// ---------------------------------------------------------------------------

SuiteReport check_conjugate(const VerificationOptions& opts) {
  SuiteReport rep{"conjugate", {}};
  const Index n = 100, p = 2, q = 2, k = q + 1;
  RngStream rng(opts.seed, 8001);
  Dataset ds;
  ds.x.resize(n, q);
  ds.y.resize(n, p);
  MatrixXd w_true(p, k);
  w_true << 1.0, 0.5, -1.0, -2.0, 1.0, 0.3;
  MatrixXd sigma_true(p, p);
  sigma_true << 1.0, 0.5, 0.5, 2.0;
  const MatrixXd l = sigma_true.llt().matrixL();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < q; ++j) ds.x(i, j) = rng.normal();
    const Eigen::Vector2d e(rng.normal(), rng.normal());
    ds.y.row(i) = (w_true.col(0) + w_true.rightCols(q) * ds.x.row(i).transpose() + l * e).transpose();
  }
  ds.delta = Mask::Ones(n, p);
  ds.kinds = {VariableKind::continuous(), VariableKind::continuous()};
  ds.x_names = {"x1", "x2"};
  ds.y_names = {"y1", "y2"};

  PriorConfig prior = PriorConfig::defaults(1, p, q);
  prior.s_b = 1e4;
  prior.s_b1 = 1e4 * MatrixXd::Identity(q, q);
  prior.nu = p + 2.0;
  prior.s_sigma = MatrixXd::Identity(p, p);

  // Closed form under a flat coefficient prior.
  MatrixXd design(n, k);
  design << VectorXd::Ones(n), ds.x;
  const MatrixXd ols = (design.transpose() * design).ldlt().solve(design.transpose() * ds.y).transpose();  // p x k
  const MatrixXd resid = ds.y - design * ols.transpose();
  const MatrixXd sigma_mean = (prior.s_sigma + resid.transpose() * resid) / (prior.nu + n - k - p - 1.0);

  ChainConfig cfg;
  cfg.standardize = false;
  cfg.init = InitStrategy::Random;
  auto data = std::make_shared<const ChainData>(ChainData::from_dataset(ds, false));
  ChainState st = init_state(data, 1, prior, cfg, RngStream(opts.seed, 8002));
  for (int t = 0; t < 500; ++t) sweep(st, prior);
  const long keep = opts.conjugate_keep;
  std::vector<std::vector<double>> trace(static_cast<std::size_t>(p * k + 3));
  for (long t = 0; t < keep; ++t) {
    sweep(st, prior);
    const auto& c = st.params.components[0];
    std::size_t j = 0;
    for (Index r = 0; r < p; ++r) trace[j++].push_back(c.b[r]);
    for (Index r = 0; r < p; ++r)
      for (Index s = 0; s < q; ++s) trace[j++].push_back(c.B(r, s));
    trace[j++].push_back(c.sigma(0, 0));
    trace[j++].push_back(c.sigma(0, 1));
    trace[j++].push_back(c.sigma(1, 1));
  }
  std::vector<std::pair<std::string, double>> targets;
  for (Index r = 0; r < p; ++r) targets.emplace_back("b[" + std::to_string(r) + "]", ols(r, 0));
  for (Index r = 0; r < p; ++r)
    for (Index s = 0; s < q; ++s)
      targets.emplace_back("B[" + std::to_string(r) + "," + std::to_string(s) + "]", ols(r, 1 + s));
  targets.emplace_back("Sigma[0,0]", sigma_mean(0, 0));
  targets.emplace_back("Sigma[0,1]", sigma_mean(0, 1));
  targets.emplace_back("Sigma[1,1]", sigma_mean(1, 1));
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const double m = stats::mean(trace[j]);
    const double se = stats::batch_means_se(trace[j], 50);
    auto c = within("conjugate_mean " + targets[j].first, m, targets[j].second, 3.0 * se);
    c.detail += " (3 MCSE)";
    rep.checks.push_back(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------

SuiteReport check_prior_recovery(const VerificationOptions& opts) {
  SuiteReport rep{"prior_recovery", {}};
  rep.checks.push_back({"u_ratio_identity", u_log_acceptance_ratio(0.3, 0.3, 0.25) == 0.0 &&
                                                u_log_acceptance_ratio(-4.0, -4.0, 1.0 / 7.0) == 0.0,
                        "log ratio at proposal == current is 0"});
  auto empty = std::make_shared<ChainData>();
  empty->x = MatrixXd(0, 1);
  empty->y = MatrixXd(0, 1);
  empty->delta = Mask(0, 1);
  empty->kinds = {VariableKind::continuous()};
  empty->x_center = VectorXd::Zero(1);
  empty->x_scale = VectorXd::Ones(1);
  empty->y_center = VectorXd::Zero(1);
  empty->y_scale = VectorXd::Ones(1);
  const long thin = 20;
  int id = 0;
  for (double a : {1.0 / 7.0, 1.0}) {
    PriorConfig prior = PriorConfig::defaults(2, 1, 1);
    prior.a = a;
    ChainState st;
    st.data = empty;
    st.params.mixing.log_u = VectorXd::Zero(2);
    st.params.mixing.alpha = MatrixXd::Zero(2, 1);
    st.params.components.assign(2, ComponentParams{VectorXd::Zero(1), MatrixXd::Zero(1, 1), MatrixXd::Identity(1, 1)});
    st.omega = MatrixXd(0, 2);
    st.rng = RngStream(opts.seed, 9000 + static_cast<std::uint64_t>(id));
    RngStream direct(opts.seed, 9100 + static_cast<std::uint64_t>(id));
    ++id;
    for (int t = 0; t < 1000; ++t) update_u(st, prior);
    std::vector<double> chain, reference;
    for (long d = 0; d < opts.prior_recovery_draws; ++d) {
      for (long t = 0; t < thin; ++t) update_u(st, prior);
      chain.push_back(st.params.mixing.log_u[1]);
      reference.push_back(truncated_gamma_log_draw(a, direct));
    }
    const std::string tag = fmt("a=%.4g", a);
    rep.checks.push_back(ks_check("u_prior_ks " + tag, stats::ks_two_sample(chain, reference), 0.01));
    const double rate = static_cast<double>(st.u_accepts) / static_cast<double>(st.u_proposals);
    rep.checks.push_back({"u_acceptance " + tag, rate > 0.2, fmt("acceptance rate %.3f", rate)});
  }
  return rep;
}

std::vector<std::string> suite_names() { return {"samplers", "geweke", "conjugate", "prior_recovery"}; }

SuiteReport run_suite(const std::string& name, const VerificationOptions& opts) {
  if (name == "samplers") return check_samplers(opts);
  if (name == "geweke") return check_geweke(opts);
  if (name == "conjugate") return check_conjugate(opts);
  if (name == "prior_recovery") return check_prior_recovery(opts);
  throw ValidationError("cli", "unknown suite '" + name + "'");
}

}  // namespace mixim
