#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mixim/data.hpp"
#include "mixim/gibbs.hpp"
#include "mixim/rng.hpp"

namespace mixim {

// Loss columns index the completed table [x | y] (covariates first).

struct MeanLoss {
  Eigen::Index column = 0;
};

/// Check loss (y - theta)(tau - I(y < theta)).
struct QuantileLoss {
  Eigen::Index column = 0;
  double tau = 0.5;
};

/// Squared error of y_col on the design (1, x, x^2).
struct QuadraticRegressionLoss {
  Eigen::Index y_column = 0;
  Eigen::Index x_column = 0;
};

/// User loss L(theta, row); minimized by Nelder-Mead from `start`.
struct CustomLoss {
  std::function<double(const Eigen::VectorXd& theta, const Eigen::RowVectorXd& row)> loss;
  Eigen::VectorXd start;
  std::string name = "custom";
};

using LossSpec = std::variant<MeanLoss, QuantileLoss, QuadraticRegressionLoss, CustomLoss>;

Eigen::Index loss_dimension(const LossSpec& loss);
std::string loss_to_string(const LossSpec& loss, const std::vector<std::string>& columns = {});
void validate_loss(const LossSpec& loss, Eigen::Index table_cols);

/// Parse "mean:COL", "quantile:COL:TAU" or "quadreg:YCOL:XCOL"; COL is a name
/// from `columns` or a 0-based index into the completed table.
LossSpec parse_loss(const std::string& text, const std::vector<std::string>& columns);

/// Prior term for the weighted Bayesian bootstrap variant:
/// minimize omega * sum w_i L - w_0 log pi(theta).
struct PriorWeight {
  std::function<double(const Eigen::VectorXd&)> log_prior;
  double omega = 1.0;
};

double minimize_weighted_mean(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights, Eigen::Index column);
double minimize_weighted_quantile(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights, Eigen::Index column,
                                  double tau);
Eigen::Vector3d minimize_weighted_quadratic_regression(const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights,
                                                       Eigen::Index y_column, Eigen::Index x_column);

/// Weighted objective sum_i w_i L(theta, row_i).
double weighted_loss(const LossSpec& loss, const Eigen::VectorXd& theta, const Eigen::MatrixXd& rows,
                     const Eigen::VectorXd& weights);

/// argmin of the weighted loss, plus the prior term when `prior` is given.
Eigen::VectorXd minimize_loss(const LossSpec& loss, const Eigen::MatrixXd& rows, const Eigen::VectorXd& weights,
                              const PriorWeight* prior = nullptr, double w0 = 0.0);

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                             double step = 0.5, double tol = 1e-10, int max_iter = 5000);

struct IlbSummary {
  Eigen::VectorXd mean, sd, lower, upper;
  double level = 0.95;
};

/// Per-coordinate mean, sd and equal-tailed interval at ((1-level)/2, (1+level)/2).
IlbSummary summarize(const Eigen::MatrixXd& samples, double level = 0.95);

struct IlbResult {
  Eigen::MatrixXd samples;  // B x d
  std::string loss;

  Eigen::VectorXd point_estimate() const { return samples.colwise().mean().transpose(); }
  IlbSummary summary(double level = 0.95) const { return summarize(samples, level); }
};

struct IlbConfig {
  long B = 500;
  int threads = 1;
  /// Replicates minimized together per chunk of completed datasets.
  long chunk = 64;
  /// Test hook: all bootstrap weights equal to 1.
  bool unit_weights = false;
};

/// Completed table [x | y] for one response draw.
Eigen::MatrixXd completed_table(const Dataset& data, const Eigen::MatrixXd& y);

/// B replicates: completed dataset from `source`, i.i.d. Exp(1) weights,
/// weighted loss minimization. Weights use per-replicate substreams, so the
/// result does not depend on the thread count.
IlbResult ilb_run(ImputationSource& source, const Dataset& data, const LossSpec& loss, const IlbConfig& config,
                  RngStream rng, const PriorWeight* prior = nullptr);

void write_ilb_csv(const IlbResult& result, const std::filesystem::path& path,
                   const std::vector<std::string>& coordinate_names = {});
nlohmann::json ilb_summary_json(const IlbResult& result, double level = 0.95);

}  // namespace mixim
