#include "doctest.h"

#include <cmath>
#include <numbers>

#include "mixim/errors.hpp"
#include "mixim/ilb.hpp"
#include "mixim/stats.hpp"

using namespace mixim;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Bisection on the sign of the derivative of a convex 1-d objective.
double minimize_by_bisection(const std::function<double(double)>& grad, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (grad(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

MatrixXd random_rows(Index n, Index cols, std::uint64_t seed) {
  RngStream rng(seed, 0);
  MatrixXd m(n, cols);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

VectorXd exp_weights(Index n, std::uint64_t seed) {
  RngStream rng(seed, 1);
  VectorXd w(n);
  for (Index i = 0; i < n; ++i) w[i] = rng.exponential();
  return w;
}

Dataset complete_dataset(const MatrixXd& y) {
  Dataset d;
  d.x = MatrixXd(y.rows(), 0);
  d.y = y;
  d.delta = Mask::Ones(y.rows(), y.cols());
  for (Index k = 0; k < y.cols(); ++k) {
    d.kinds.push_back(VariableKind::continuous());
    d.y_names.push_back("y" + std::to_string(k + 1));
  }
  return d;
}

}  // namespace

TEST_CASE("weighted mean") {
  MatrixXd rows(3, 1);
  rows << 1.0, 2.0, 6.0;
  CHECK(minimize_weighted_mean(rows, VectorXd::Ones(3), 0) == doctest::Approx(3.0));
  CHECK(minimize_weighted_mean(rows, (VectorXd(3) << 1, 0, 0).finished(), 0) == 1.0);
  const MatrixXd r = random_rows(50, 2, 1);
  const VectorXd w = exp_weights(50, 1);
  const double t = minimize_by_bisection([&](double t) { return -2.0 * w.dot((r.col(1).array() - t).matrix()); }, -10, 10);
  CHECK(std::abs(minimize_weighted_mean(r, w, 1) - t) < 1e-10);
  CHECK_THROWS_AS(minimize_weighted_mean(r, VectorXd::Zero(50), 0), ValidationError);
}

TEST_CASE("weighted quantile minimizes the check loss") {
  const MatrixXd r = random_rows(41, 1, 2);
  const VectorXd w = exp_weights(41, 2);
  for (double tau : {0.1, 0.5, 0.77}) {
    const double q = minimize_weighted_quantile(r, w, 0, tau);
    const LossSpec loss = QuantileLoss{0, tau};
    const VectorXd th = VectorXd::Constant(1, q);
    const double best = weighted_loss(loss, th, r, w);
    // The minimum of a piecewise-linear convex loss sits at a data point.
    for (Index i = 0; i < r.rows(); ++i) {
      CHECK(best <= weighted_loss(loss, VectorXd::Constant(1, r(i, 0)), r, w) + 1e-12);
    }
  }
  MatrixXd odd(5, 1);
  odd << 5, 1, 4, 2, 3;
  CHECK(minimize_weighted_quantile(odd, VectorXd::Ones(5), 0, 0.5) == 3.0);
  CHECK_THROWS_AS(minimize_weighted_quantile(odd, VectorXd::Ones(5), 0, 1.0), ValidationError);
}

TEST_CASE("weighted quadratic regression matches a weighted least-squares QR solve") {
  const Index n = 60;
  MatrixXd rows = random_rows(n, 2, 3);
  for (Index i = 0; i < n; ++i) rows(i, 0) = 1.0 - 2.0 * rows(i, 1) + 0.5 * rows(i, 1) * rows(i, 1) + 0.1 * rows(i, 0);
  const VectorXd w = exp_weights(n, 3);
  MatrixXd design(n, 3);
  VectorXd target(n);
  for (Index i = 0; i < n; ++i) {
    const double s = std::sqrt(w[i]), x = rows(i, 1);
    design.row(i) << s, s * x, s * x * x;
    target[i] = s * rows(i, 0);
  }
  const VectorXd qr = design.colPivHouseholderQr().solve(target);
  const Eigen::Vector3d theta = minimize_weighted_quadratic_regression(rows, w, 0, 1);
  CHECK((theta - qr).cwiseAbs().maxCoeff() < 1e-9);
  MatrixXd two(4, 2);
  two << 1, 0, 2, 1, 3, 0, 4, 1;
  CHECK_THROWS_AS(minimize_weighted_quadratic_regression(two, VectorXd::Ones(4), 0, 1), ValidationError);
}

TEST_CASE("nelder-mead and the custom-loss path agree with closed forms") {
  const MatrixXd r = random_rows(30, 1, 4);
  const VectorXd w = exp_weights(30, 4);
  CustomLoss sq{[](const VectorXd& t, const Eigen::RowVectorXd& row) { return (row[0] - t[0]) * (row[0] - t[0]); },
                VectorXd::Zero(1), "sq"};
  const VectorXd t = minimize_loss(sq, r, w);
  CHECK(t[0] == doctest::Approx(minimize_weighted_mean(r, w, 0)).epsilon(1e-6));
  const auto rosen = nelder_mead(
      [](const VectorXd& v) { return 100 * std::pow(v[1] - v[0] * v[0], 2) + std::pow(1 - v[0], 2); },
      (VectorXd(2) << -1.2, 1.0).finished());
  CHECK(rosen.converged);
  CHECK(rosen.x[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("prior-weighted variant with a normal prior shrinks the mean") {
  const MatrixXd r = MatrixXd::Constant(10, 1, 2.0);
  const VectorXd w = VectorXd::Ones(10);
  // omega * sum (2 - t)^2 + w0 t^2 / 2: minimizer 2 omega n / (omega n + w0 / 2)
  PriorWeight prior{[](const VectorXd& t) { return -0.5 * t[0] * t[0]; }, 1.0};
  const VectorXd t = minimize_loss(MeanLoss{0}, r, w, &prior, 1.0);
  CHECK(t[0] == doctest::Approx(2.0 * 10.0 / 10.5).epsilon(1e-6));
}

TEST_CASE("loss parsing") {
  const std::vector<std::string> cols{"x1", "y1", "y2"};
  CHECK(std::get<MeanLoss>(parse_loss("mean:y1", cols)).column == 1);
  const auto q = std::get<QuantileLoss>(parse_loss("quantile:y2:0.25", cols));
  CHECK(q.column == 2);
  CHECK(q.tau == 0.25);
  const auto qr = std::get<QuadraticRegressionLoss>(parse_loss("quadreg:y2:x1", cols));
  CHECK(qr.y_column == 2);
  CHECK(qr.x_column == 0);
  CHECK(std::get<MeanLoss>(parse_loss("mean:2", cols)).column == 2);
  CHECK_THROWS_AS(parse_loss("mean:zz", cols), ValidationError);
  CHECK_THROWS_AS(parse_loss("quantile:y1:1.5", cols), ValidationError);
  CHECK_THROWS_AS(parse_loss("median:y1", cols), ValidationError);
  CHECK_THROWS_AS(validate_loss(MeanLoss{5}, 3), ValidationError);
  CHECK(loss_dimension(QuadraticRegressionLoss{}) == 3);
}

TEST_CASE("summaries use equal-tailed quantiles") {
  MatrixXd s(101, 1);
  for (Index i = 0; i < 101; ++i) s(i, 0) = static_cast<double>(i);
  const auto sum = summarize(s, 0.9);
  CHECK(sum.mean[0] == doctest::Approx(50.0));
  CHECK(sum.lower[0] == doctest::Approx(5.0));
  CHECK(sum.upper[0] == doctest::Approx(95.0));
  CHECK_THROWS_AS(summarize(s, 1.0), ValidationError);
}

TEST_CASE("unit weights on complete data reproduce the point estimate") {
  const auto d = complete_dataset(random_rows(25, 1, 5));
  CompleteDataSource src(d);
  IlbConfig cfg;
  cfg.B = 10;
  cfg.unit_weights = true;
  const auto res = ilb_run(src, d, MeanLoss{0}, cfg, RngStream(1, 0));
  for (Index b = 0; b < 10; ++b) CHECK(res.samples(b, 0) == doctest::Approx(d.y.col(0).mean()));
}

TEST_CASE("ilb output does not depend on thread count or chunking") {
  const auto d = complete_dataset(random_rows(200, 2, 6));
  IlbConfig one;
  one.B = 100;
  IlbConfig many = one;
  many.threads = 4;
  many.chunk = 7;
  CompleteDataSource s1(d), s2(d);
  const auto a = ilb_run(s1, d, QuantileLoss{1, 0.3}, one, RngStream(9, 0));
  const auto b = ilb_run(s2, d, QuantileLoss{1, 0.3}, many, RngStream(9, 0));
  CHECK(a.samples == b.samples);
}

TEST_CASE("complete-data mean bootstrap variance is close to s^2 / n") {
  const Index n = 500;
  const auto d = complete_dataset(random_rows(n, 1, 7));
  CompleteDataSource src(d);
  IlbConfig cfg;
  cfg.B = 1000;
  const auto res = ilb_run(src, d, MeanLoss{0}, cfg, RngStream(3, 0));
  std::vector<double> th(res.samples.data(), res.samples.data() + res.samples.size());
  std::vector<double> y(d.y.data(), d.y.data() + n);
  const double target = stats::variance(y) * (n - 1.0) / n / n;
  CHECK(stats::variance(th) == doctest::Approx(target).epsilon(0.15));
  CHECK(stats::mean(th) == doctest::Approx(stats::mean(y)).scale(1.0).epsilon(0.01));
}
