#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "json.hpp"
#include "mixim/data.hpp"
#include "mixim/rng.hpp"

namespace mixim {

/// One Gaussian expert: y | x ~ N(b + B x, Sigma).
struct ComponentParams {
  Eigen::VectorXd b;      // p
  Eigen::MatrixXd B;      // p x q
  Eigen::MatrixXd sigma;  // p x p, SPD

  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& x) const { return b + B * x; }
};

/// Multinomial-logit gate: pi_g(x) proportional to u_g exp(x^T alpha_g).
/// Component 0 is the reference (log_u[0] = 0, alpha.row(0) = 0).
struct MixingParams {
  Eigen::VectorXd log_u;  // G
  Eigen::MatrixXd alpha;  // G x q
};

struct ModelParams {
  MixingParams mixing;
  std::vector<ComponentParams> components;

  int G() const { return static_cast<int>(components.size()); }
  Eigen::Index p() const { return components.empty() ? 0 : components.front().b.size(); }
  Eigen::Index q() const { return mixing.alpha.cols(); }

  /// Shape and SPD checks; `require_pin` also enforces the reference component.
  void validate(bool require_pin = true) const;
};

/// Priors: u_g ~ Ga(a, 1); alpha_g ~ N(0, S_alpha);
/// vec([b_g, B_g]) ~ N(0, blockdiag(S_b, S_B1) (x) S_B2); Sigma_g ~ IW(nu, S_Sigma).
struct PriorConfig {
  double a = 1.0;
  Eigen::MatrixXd s_alpha;  // q x q
  Eigen::MatrixXd s_b1;     // q x q
  Eigen::MatrixXd s_b2;     // p x p
  double s_b = 10.0;
  double nu = 4.0;
  Eigen::MatrixXd s_sigma;  // p x p

  /// Defaults for standardized data: a = 1/G, S_alpha = 4 I, S_b = 10,
  /// S_B1 = 10 I, S_B2 = I, nu = p + 2, S_Sigma = 0.5 I.
  static PriorConfig defaults(int G, Eigen::Index p, Eigen::Index q);
  void validate(Eigen::Index p, Eigen::Index q) const;

  /// Column covariance of the augmented coefficient matrix [b, B]: blockdiag(S_b, S_B1).
  Eigen::MatrixXd coefficient_col_cov() const;
};

struct GaussianBlock {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

using IndexSet = std::span<const int>;

/// Mixing probabilities at x; exact simplex vector computed in log space.
Eigen::VectorXd mixing_probs(const MixingParams& mixing, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd mixing_log_probs(const MixingParams& mixing, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Marginal of one component over the observed coordinates.
GaussianBlock component_obs_marginal(const ComponentParams& comp, const Eigen::Ref<const Eigen::VectorXd>& x,
                                     IndexSet obs_idx);

/// Conditional of the missing coordinates given the observed ones (Schur
/// complement via Cholesky solves). Empty obs_idx gives the marginal.
GaussianBlock component_mis_conditional(const ComponentParams& comp, const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXd>& y_obs, IndexSet obs_idx,
                                        IndexSet mis_idx);

/// P(z = g | x, y_obs); reduces to mixing_probs when obs_idx is empty.
Eigen::VectorXd component_posterior(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& y_obs, IndexSet obs_idx);

/// Two-stage draw of y_mis: component from component_posterior, then the
/// within-component Gaussian conditional. Returns values ordered as mis_idx.
Eigen::VectorXd impute_row(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y_obs, IndexSet obs_idx, IndexSet mis_idx,
                           RngStream& rng);

/// Observed-data log-likelihood; rows with no observed response contribute 0.
/// Uses the response values directly, so discrete columns should be supplied
/// on the latent scale by the caller.
double loglik_obs(const ModelParams& params, const Dataset& data);

/// Log of the mixture density of the observed pattern of one row.
double row_loglik_obs(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& y_obs, IndexSet obs_idx);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

nlohmann::json to_json(const ModelParams& params);
ModelParams model_params_from_json(const nlohmann::json& j);

}  // namespace mixim
