#include "mixim/distributions.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "mixim/errors.hpp"

namespace mixim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::LLT<MatrixXd> robust_cholesky(const MatrixXd& a, const char* context) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() == Eigen::Success && a.allFinite()) return llt;
  if (!a.allFinite()) throw NumericalError("distributions", std::string(context) + ": non-finite matrix");
  const double dim = static_cast<double>(a.rows());
  double jitter = 1e-8 * std::abs(a.trace()) / dim;
  if (jitter == 0.0) jitter = 1e-8;
  MatrixXd b = a;
  b.diagonal().array() += jitter;
  llt.compute(b);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("distributions", std::string(context) + ": matrix not positive definite");
  }
  return llt;
}

VectorXd sample_gaussian_canonical(const MatrixXd& precision, const VectorXd& linear, RngStream& rng,
                                   const char* context) {
  const auto llt = robust_cholesky(precision, context);
  const VectorXd mean = llt.solve(linear);
  VectorXd z(precision.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // P = L L^T, so L^{-T} z has covariance P^{-1}.
  return mean + llt.matrixU().solve(z);
}

VectorXd sample_gaussian(const VectorXd& mean, const MatrixXd& cov, RngStream& rng) {
  const auto llt = robust_cholesky(cov, "sample_gaussian");
  VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_logcdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.5 * kLogTwoPi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

double gaussian_logpdf(const VectorXd& y, const VectorXd& mean, const MatrixXd& cov) {
  if (y.size() != mean.size() || cov.rows() != y.size() || cov.cols() != y.size()) {
    throw ValidationError("distributions", "gaussian_logpdf: dimension mismatch");
  }
  return gaussian_logpdf_chol(y, mean, robust_cholesky(cov, "gaussian_logpdf"));
}

double polya_gamma_mean(double c) {
  const double a = std::abs(c);
  if (a < 1e-6) return 0.25 - a * a / 48.0;
  return std::tanh(0.5 * a) / (2.0 * a);
}

double polya_gamma_variance(double c) {
  const double a = std::abs(c);
  if (a < 1e-3) return 1.0 / 24.0 - a * a / 240.0;
  const double ch = std::cosh(0.5 * a);
  return (std::sinh(a) - a) / (4.0 * a * a * a * ch * ch);
}

// ---------------------------------------------------------------------------
// Polya-Gamma PG(1, c) = J*(1, |c|/2) / 4.

namespace {

constexpr double kPgTruncation = 0.64;

// Alternating-series coefficients of the J*(1, 0) density.
double pg_series_term(int n, double x) {
  const double k = n + 0.5;
  if (x <= kPgTruncation) {
    return std::numbers::pi * k * std::pow(2.0 / (std::numbers::pi * x), 1.5) *
           std::exp(-2.0 * k * k / x);
  }
  return std::numbers::pi * k * std::exp(-0.5 * k * k * std::numbers::pi * std::numbers::pi * x);
}

// Inverse-Gaussian IG(mu, 1) draw restricted to (0, t).
double truncated_inverse_gaussian(double z, RngStream& rng) {
  const double t = kPgTruncation;
  if (z < 1.0 / t) {
    // mu = 1/z > t: proposal from the z = 0 (Levy) law on (0, t), tilted by exp(-z^2 x / 2).
    for (;;) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      const double x = t / ((1.0 + t * e1) * (1.0 + t * e1));
      if (rng.uniform() <= std::exp(-0.5 * z * z * x)) return x;
    }
  }
  const double mu = 1.0 / z;
  for (;;) {
    const double n = rng.normal();
    const double y = n * n;
    double x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + mu * mu * y * y);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x < t) return x;
  }
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double sample_polya_gamma(double c, RngStream& rng) {
  const double z = 0.5 * std::abs(c);
  const double t = kPgTruncation;
  const double k = 0.125 * std::numbers::pi * std::numbers::pi + 0.5 * z * z;

  // Mixture weights of the right (exponential) and left (inverse Gaussian) proposals.
  const double log_p = std::log(0.5 * std::numbers::pi / k) - k * t;
  const double sqrt_t = std::sqrt(t);
  const double log_ig_cdf =
      log_add_exp(normal_logcdf((t * z - 1.0) / sqrt_t), 2.0 * z + normal_logcdf(-(t * z + 1.0) / sqrt_t));
  const double log_q = std::log(2.0) - z + log_ig_cdf;
  const double prob_right = 1.0 / (1.0 + std::exp(log_q - log_p));

  for (;;) {
    const double x = rng.uniform() < prob_right ? t + rng.exponential() / k
                                                : truncated_inverse_gaussian(z, rng);
    double s = pg_series_term(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= pg_series_term(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += pg_series_term(n, x);
        if (y > s) break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Truncated normal

namespace {

// Standard normal on (a, inf), a > 0, by exponential rejection with the optimal rate.
double std_normal_right_tail(double a, RngStream& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential() / lambda;
    const double d = z - lambda;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

// Uniform proposal on (a, b); the envelope peak is at the point of (a, b) closest to zero.
double std_normal_uniform_rejection(double a, double b, RngStream& rng) {
  const double peak = (a > 0.0) ? a * a : (b < 0.0 ? b * b : 0.0);
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (rng.uniform() <= std::exp(0.5 * (peak - z * z))) return z;
  }
}

// 0 <= a < b <= inf.
double std_normal_right_interval(double a, double b, RngStream& rng) {
  if (std::isfinite(b) && b * b - a * a <= 2.0) return std_normal_uniform_rejection(a, b, rng);
  if (a < 0.5) {
    for (;;) {
      const double z = rng.normal();
      if (z > a && z < b) return z;
    }
  }
  for (;;) {
    const double z = std_normal_right_tail(a, rng);
    if (z < b) return z;
  }
}

}  // namespace

double sample_truncated_std_normal(double a, double b, RngStream& rng) {
  if (!(a < b)) throw ValidationError("distributions", "truncated normal: empty interval");
  if (a >= 0.0) return std_normal_right_interval(a, b, rng);
  if (b <= 0.0) return -std_normal_right_interval(-b, -a, rng);
  // Interval straddles zero.
  if (b - a >= 1.0) {
    for (;;) {
      const double z = rng.normal();
      if (z > a && z < b) return z;
    }
  }
  return std_normal_uniform_rejection(a, b, rng);
}

double sample_truncated_normal(double mu, double sigma2, TruncationInterval interval, RngStream& rng) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ValidationError("distributions", "truncated normal: variance must be positive");
  }
  if (!(interval.lower < interval.upper)) {
    throw ValidationError("distributions", "truncated normal: lower bound must be below upper bound");
  }
  const double sd = std::sqrt(sigma2);
  const double a = (interval.lower - mu) / sd;
  const double b = (interval.upper - mu) / sd;
  double draw = mu + sd * sample_truncated_std_normal(a, b, rng);
  // Guard against rounding onto a finite bound.
  if (draw <= interval.lower) draw = std::nextafter(interval.lower, kInf);
  if (draw > interval.upper) draw = interval.upper;
  return draw;
}

// ---------------------------------------------------------------------------

MatrixXd sample_inverse_wishart(double nu, const MatrixXd& scale, RngStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw ValidationError("distributions", "inverse Wishart: scale must be square");
  if (!(nu > static_cast<double>(p) - 1.0)) {
    throw ValidationError("distributions", "inverse Wishart: degrees of freedom must exceed dim - 1");
  }
  const auto llt = robust_cholesky(scale, "inverse Wishart scale");
  MatrixXd bartlett = MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_square(nu - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  // Sigma = (L A^{-T})(L A^{-T})^T where scale = L L^T.
  const MatrixXd l = llt.matrixL();
  const MatrixXd factor = bartlett.triangularView<Eigen::Lower>().solve(l.transpose()).transpose();
  MatrixXd sigma = factor * factor.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

MatrixXd sample_matrix_normal(const MatrixXd& mean, const MatrixXd& row_cov, const MatrixXd& col_cov,
                              RngStream& rng) {
  if (row_cov.rows() != mean.rows() || col_cov.rows() != mean.cols()) {
    throw ValidationError("distributions", "matrix normal: dimension mismatch");
  }
  const auto lu = robust_cholesky(row_cov, "matrix normal row covariance");
  const auto lv = robust_cholesky(col_cov, "matrix normal column covariance");
  MatrixXd z(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
  return mean + MatrixXd(lu.matrixL()) * z * MatrixXd(lv.matrixL()).transpose();
}

int sample_categorical(std::span<const double> weights, RngStream& rng) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("distributions", "categorical: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("distributions", "categorical: all weights are zero");
  const double target = rng.uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t g = 0; g < weights.size(); ++g) {
    if (weights[g] <= 0.0) continue;
    acc += weights[g];
    last_positive = static_cast<int>(g);
    if (target < acc) return last_positive;
  }
  return last_positive;
}

int sample_categorical_log(std::span<const double> log_weights, RngStream& rng) {
  if (log_weights.empty()) throw ValidationError("distributions", "categorical: no weights");
  double m = -kInf;
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == kInf) throw ValidationError("distributions", "categorical: invalid log weight");
    m = std::max(m, lw);
  }
  if (m == -kInf) throw ValidationError("distributions", "categorical: all weights are zero");
  double buf[64];
  std::vector<double> heap;
  double* w = buf;
  if (log_weights.size() > 64) {
    heap.resize(log_weights.size());
    w = heap.data();
  }
  for (std::size_t g = 0; g < log_weights.size(); ++g) w[g] = std::exp(log_weights[g] - m);
  return sample_categorical(std::span<const double>(w, log_weights.size()), rng);
}

// ---------------------------------------------------------------------------

LogGammaMoments log_gamma_moments(double shape) {
  if (!(shape > 0.0)) throw ValidationError("distributions", "log-gamma moments: shape must be positive");
  static std::mutex mutex;
  static std::map<double, LogGammaMoments> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(shape); it != cache.end()) return it->second;
  }
  // Density of t = log u: exp(shape * t - e^t) / Gamma(shape). Trapezoid rule on a
  // window covering the exponential left tail (rate `shape`) and the
  // double-exponential right tail; the integrand is analytic, so the rule
  // converges geometrically in the step size.
  const double lower = -45.0 / shape - 10.0;
  const double upper = 6.0;
  const double h = 0.002;
  const double log_norm = std::lgamma(shape);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (double t = lower; t <= upper; t += h) {
    const double f = std::exp(shape * t - std::exp(t) - log_norm);
    m0 += f;
    m1 += f * t;
    m2 += f * t * t;
  }
  const double mean = m1 / m0;
  const LogGammaMoments result{mean, m2 / m0 - mean * mean};
  std::lock_guard lock(mutex);
  cache.emplace(shape, result);
  return result;
}

}  // namespace mixim
