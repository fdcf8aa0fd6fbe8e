#include "mixim/model.hpp"

#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"

namespace mixim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool is_spd(const MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-10)) return false;
  return Eigen::LLT<MatrixXd>(m).info() == Eigen::Success;
}

std::vector<double> to_vector(const MatrixXd& m) {
  // Row-major flattening for readability in JSON.
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

MatrixXd from_vector(const std::vector<double>& v, Index rows, Index cols) {
  if (static_cast<Index>(v.size()) != rows * cols) {
    throw ValidationError("cgmm_core", "matrix payload has wrong size");
  }
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  return m;
}

}  // namespace

void ModelParams::validate(bool require_pin) const {
  const int g_count = G();
  if (g_count < 1) throw ValidationError("cgmm_core", "at least one component required");
  if (mixing.log_u.size() != g_count || mixing.alpha.rows() != g_count) {
    throw ValidationError("cgmm_core", "mixing parameters do not match component count");
  }
  const Index pp = p();
  for (const auto& c : components) {
    if (c.b.size() != pp || c.B.rows() != pp || c.B.cols() != q() || c.sigma.rows() != pp) {
      throw ValidationError("cgmm_core", "component dimensions inconsistent");
    }
    if (!is_spd(c.sigma)) throw ValidationError("cgmm_core", "component covariance is not SPD");
  }
  if (require_pin && (mixing.log_u[0] != 0.0 || (q() > 0 && !mixing.alpha.row(0).isZero(0.0)))) {
    throw ValidationError("cgmm_core", "reference component must have log_u = 0 and alpha = 0");
  }
}

PriorConfig PriorConfig::defaults(int G, Index p, Index q) {
  PriorConfig prior;
  prior.a = 1.0 / G;
  prior.s_alpha = 4.0 * MatrixXd::Identity(q, q);
  prior.s_b1 = 10.0 * MatrixXd::Identity(q, q);
  prior.s_b2 = MatrixXd::Identity(p, p);
  prior.s_b = 10.0;
  prior.nu = static_cast<double>(p) + 2.0;
  prior.s_sigma = 0.5 * MatrixXd::Identity(p, p);
  return prior;
}

void PriorConfig::validate(Index p, Index q) const {
  if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("cgmm_core", "prior a must be positive");
  if (!(s_b > 0.0)) throw ValidationError("cgmm_core", "prior S_b must be positive");
  if (!(nu > static_cast<double>(p) - 1.0)) throw ValidationError("cgmm_core", "prior nu must exceed p - 1");
  auto check = [](const MatrixXd& m, Index dim, const char* name) {
    if (m.rows() != dim || m.cols() != dim) {
      throw ValidationError("cgmm_core", std::string("prior ") + name + " has wrong dimension");
    }
    if (dim > 0 && !is_spd(m)) throw ValidationError("cgmm_core", std::string("prior ") + name + " is not SPD");
  };
  check(s_alpha, q, "S_alpha");
  check(s_b1, q, "S_B1");
  check(s_b2, p, "S_B2");
  check(s_sigma, p, "S_Sigma");
}

MatrixXd PriorConfig::coefficient_col_cov() const {
  const Index q = s_b1.rows();
  MatrixXd d = MatrixXd::Zero(q + 1, q + 1);
  d(0, 0) = s_b;
  d.bottomRightCorner(q, q) = s_b1;
  return d;
}

// ---------------------------------------------------------------------------

double log_sum_exp(const Eigen::Ref<const VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

VectorXd mixing_log_probs(const MixingParams& mixing, const Eigen::Ref<const VectorXd>& x) {
  VectorXd eta = mixing.log_u;
  if (x.size() > 0) eta.noalias() += mixing.alpha * x;
  return eta.array() - log_sum_exp(eta);
}

VectorXd mixing_probs(const MixingParams& mixing, const Eigen::Ref<const VectorXd>& x) {
  VectorXd pr = mixing_log_probs(mixing, x).array().exp();
  return pr / pr.sum();
}

GaussianBlock component_obs_marginal(const ComponentParams& comp, const Eigen::Ref<const VectorXd>& x,
                                     IndexSet obs_idx) {
  const VectorXd mu = comp.mean(x);
  const std::vector<int> idx(obs_idx.begin(), obs_idx.end());
  return {mu(idx), comp.sigma(idx, idx)};
}

GaussianBlock component_mis_conditional(const ComponentParams& comp, const Eigen::Ref<const VectorXd>& x,
                                        const Eigen::Ref<const VectorXd>& y_obs, IndexSet obs_idx,
                                        IndexSet mis_idx) {
  const VectorXd mu = comp.mean(x);
  const std::vector<int> obs(obs_idx.begin(), obs_idx.end());
  const std::vector<int> mis(mis_idx.begin(), mis_idx.end());
  GaussianBlock out{mu(mis), comp.sigma(mis, mis)};
  if (obs.empty()) return out;
  if (y_obs.size() != static_cast<Index>(obs.size())) {
    throw ValidationError("cgmm_core", "observed vector does not match observed index set");
  }
  const auto llt = robust_cholesky(comp.sigma(obs, obs), "conditional Sigma_oo");
  // gain^T = Sigma_oo^{-1} Sigma_om
  const MatrixXd gain_t = llt.solve(MatrixXd(comp.sigma(obs, mis)));
  out.mean.noalias() += gain_t.transpose() * (y_obs - mu(obs));
  out.cov.noalias() -= gain_t.transpose() * comp.sigma(obs, mis);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

VectorXd component_posterior(const ModelParams& params, const Eigen::Ref<const VectorXd>& x,
                             const Eigen::Ref<const VectorXd>& y_obs, IndexSet obs_idx) {
  VectorXd logw = mixing_log_probs(params.mixing, x);
  if (!obs_idx.empty()) {
    for (int g = 0; g < params.G(); ++g) {
      const auto marg = component_obs_marginal(params.components[g], x, obs_idx);
      logw[g] += gaussian_logpdf_chol(y_obs, marg.mean, robust_cholesky(marg.cov, "posterior Sigma_oo"));
    }
  }
  VectorXd w = (logw.array() - log_sum_exp(logw)).exp();
  return w / w.sum();
}

VectorXd impute_row(const ModelParams& params, const Eigen::Ref<const VectorXd>& x,
                    const Eigen::Ref<const VectorXd>& y_obs, IndexSet obs_idx, IndexSet mis_idx, RngStream& rng) {
  if (mis_idx.empty()) return VectorXd();
  const VectorXd w = component_posterior(params, x, y_obs, obs_idx);
  const int g = sample_categorical(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), rng);
  const auto cond = component_mis_conditional(params.components[g], x, y_obs, obs_idx, mis_idx);
  return sample_gaussian(cond.mean, cond.cov, rng);
}

double row_loglik_obs(const ModelParams& params, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const VectorXd>& y_obs, IndexSet obs_idx) {
  if (obs_idx.empty()) return 0.0;
  VectorXd logw = mixing_log_probs(params.mixing, x);
  for (int g = 0; g < params.G(); ++g) {
    const auto marg = component_obs_marginal(params.components[g], x, obs_idx);
    logw[g] += gaussian_logpdf_chol(y_obs, marg.mean, robust_cholesky(marg.cov, "loglik Sigma_oo"));
  }
  return log_sum_exp(logw);
}

double loglik_obs(const ModelParams& params, const Dataset& data) {
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const auto pattern = split_pattern(data, i);
    if (pattern.obs.empty()) continue;
    const VectorXd x = data.x.row(i).transpose();
    const VectorXd y_obs = data.y.row(i)(pattern.obs).transpose();
    total += row_loglik_obs(params, x, y_obs, pattern.obs);
  }
  return total;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const ModelParams& params) {
  nlohmann::json j;
  j["G"] = params.G();
  j["p"] = params.p();
  j["q"] = params.q();
  j["log_u"] = std::vector<double>(params.mixing.log_u.data(), params.mixing.log_u.data() + params.mixing.log_u.size());
  j["alpha"] = to_vector(params.mixing.alpha);
  auto& comps = j["components"] = nlohmann::json::array();
  for (const auto& c : params.components) {
    comps.push_back({{"b", std::vector<double>(c.b.data(), c.b.data() + c.b.size())},
                     {"B", to_vector(c.B)},
                     {"sigma", to_vector(c.sigma)}});
  }
  return j;
}

ModelParams model_params_from_json(const nlohmann::json& j) {
  try {
    const int G = j.at("G").get<int>();
    const Index p = j.at("p").get<Index>();
    const Index q = j.at("q").get<Index>();
    ModelParams params;
    params.mixing.log_u = from_vector(j.at("log_u").get<std::vector<double>>(), G, 1);
    params.mixing.alpha = from_vector(j.at("alpha").get<std::vector<double>>(), G, q);
    const auto& comps = j.at("components");
    if (static_cast<int>(comps.size()) != G) throw ValidationError("cgmm_core", "component count mismatch");
    for (const auto& c : comps) {
      ComponentParams cp;
      cp.b = from_vector(c.at("b").get<std::vector<double>>(), p, 1);
      cp.B = from_vector(c.at("B").get<std::vector<double>>(), p, q);
      cp.sigma = from_vector(c.at("sigma").get<std::vector<double>>(), p, p);
      params.components.push_back(std::move(cp));
    }
    params.validate(false);
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cgmm_core", std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace mixim
