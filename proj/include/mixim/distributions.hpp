#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "mixim/rng.hpp"

namespace mixim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Interval (lower, upper); either bound may be infinite.
struct TruncationInterval {
  double lower = -kInf;
  double upper = kInf;
  bool contains(double v) const { return v > lower && v <= upper; }
};

// ---------------------------------------------------------------------------
// Cholesky with a single jitter retry.

/// Cholesky factor of a symmetric positive definite matrix. On failure a
/// jitter of 1e-8 * trace / dim is added to the diagonal once; a second
/// failure throws NumericalError naming `context`.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a, const char* context);

/// Draw from N(P^{-1} h, P^{-1}) given precision P and linear term h.
Eigen::VectorXd sample_gaussian_canonical(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& linear, RngStream& rng,
                                          const char* context);

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                RngStream& rng);

// ---------------------------------------------------------------------------
// Samplers

/// Exact PG(1, c) draw via the alternating-series accept-reject method.
double sample_polya_gamma(double c, RngStream& rng);

/// Draw from N(mu, sigma2) restricted to `interval`.
double sample_truncated_normal(double mu, double sigma2, TruncationInterval interval,
                               RngStream& rng);

/// Standard normal restricted to (a, b).
double sample_truncated_std_normal(double a, double b, RngStream& rng);

/// IW(nu, scale) via the Bartlett decomposition; never forms a dense inverse.
Eigen::MatrixXd sample_inverse_wishart(double nu, const Eigen::MatrixXd& scale, RngStream& rng);

/// MN(M, U, V): M + L_U Z L_V^T.
Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& row_cov,
                                     const Eigen::MatrixXd& col_cov, RngStream& rng);

/// Index drawn with probability proportional to `weights`.
int sample_categorical(std::span<const double> weights, RngStream& rng);

/// Index drawn with probability proportional to exp(log_weights); max-shifted.
int sample_categorical_log(std::span<const double> log_weights, RngStream& rng);

// ---------------------------------------------------------------------------
// Densities and moments

/// Multivariate normal log-density from a precomputed Cholesky factor of cov.
template <typename DerivedY, typename DerivedM>
double gaussian_logpdf_chol(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedM>& mean,
                       const Eigen::LLT<Eigen::MatrixXd>& cov_llt) {
  const Eigen::Index d = y.size();
  if (d == 0) return 0.0;
  const Eigen::VectorXd r = cov_llt.matrixL().solve((y - mean).eval());
  const double log_det = 2.0 * cov_llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(d) * kLogTwoPi + log_det + r.squaredNorm());
}

double gaussian_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov);

double normal_cdf(double x);
double normal_logcdf(double x);
double normal_logpdf(double x, double mean, double var);

/// E[PG(1, c)] = tanh(c/2) / (2c), with the c -> 0 limit 1/4.
double polya_gamma_mean(double c);
/// Var[PG(1, c)] = (sinh c - c) / (4 c^3 cosh^2(c/2)), limit 1/24.
double polya_gamma_variance(double c);

/// E[log u] and Var(log u) for u ~ Ga(shape, 1), by quadrature on the log scale.
struct LogGammaMoments {
  double mean;
  double variance;
};
LogGammaMoments log_gamma_moments(double shape);

}  // namespace mixim
