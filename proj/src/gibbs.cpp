#include "mixim/gibbs.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "mixim/csv.hpp"
#include "mixim/distributions.hpp"
#include "mixim/errors.hpp"

namespace mixim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLogUUpper = 2.0;

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXd spd_inverse(const MatrixXd& m, const char* context) {
  return robust_cholesky(m, context).solve(MatrixXd::Identity(m.rows(), m.cols()));
}

// Linear predictor of the gate, n x G.
MatrixXd gate_eta(const ChainState& s) {
  const auto& x = s.data->x;
  MatrixXd eta = s.params.mixing.log_u.transpose().replicate(x.rows(), 1);
  if (x.cols() > 0) eta.noalias() += x * s.params.mixing.alpha.transpose();
  return eta;
}

// C_ig = log sum_{h != g} exp(eta_ih).
VectorXd gate_offset(const MatrixXd& eta, int g) {
  const Index n = eta.rows();
  const Index G = eta.cols();
  VectorXd c(n);
  for (Index i = 0; i < n; ++i) {
    double m = -kInf;
    for (Index h = 0; h < G; ++h)
      if (h != g) m = std::max(m, eta(i, h));
    double acc = 0.0;
    for (Index h = 0; h < G; ++h)
      if (h != g) acc += std::exp(eta(i, h) - m);
    c[i] = m + std::log(acc);
  }
  return c;
}

double kappa(const ChainState& s, Index i, int g) { return (s.z[static_cast<std::size_t>(i)] == g ? 0.5 : -0.5); }

void draw_omega_column(ChainState& s, const MatrixXd& eta, const VectorXd& offset, int g) {
  for (Index i = 0; i < eta.rows(); ++i) s.omega(i, g) = sample_polya_gamma(eta(i, g) - offset[i], s.rng);
}

void draw_alpha(ChainState& s, const PriorConfig& prior, const VectorXd& offset, int g) {
  const auto& x = s.data->x;
  const Index q = x.cols();
  if (q == 0) return;
  const double lu = s.params.mixing.log_u[g];
  MatrixXd precision = spd_inverse(prior.s_alpha, "S_alpha");
  VectorXd linear = VectorXd::Zero(q);
  const double sign = s.fault.alpha_kappa_sign ? -1.0 : 1.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double w = s.omega(i, g);
    precision.noalias() += w * x.row(i).transpose() * x.row(i);
    linear.noalias() += (sign * kappa(s, i, g) + w * (offset[i] - lu)) * x.row(i).transpose();
  }
  s.params.mixing.alpha.row(g) = sample_gaussian_canonical(precision, linear, s.rng, "alpha precision").transpose();
}

void draw_log_u(ChainState& s, const PriorConfig& prior, const VectorXd& offset, int g) {
  const auto& x = s.data->x;
  const auto moments = log_gamma_moments(prior.a);
  double sum_omega = 0.0;
  double linear = moments.mean / moments.variance;
  for (Index i = 0; i < x.rows(); ++i) {
    const double xa = x.cols() > 0 ? x.row(i).dot(s.params.mixing.alpha.row(g)) : 0.0;
    const double w = s.omega(i, g);
    sum_omega += w;
    linear += kappa(s, i, g) + w * (offset[i] - xa);
  }
  const double var = 1.0 / (sum_omega + 1.0 / moments.variance);
  const double proposal = sample_truncated_normal(var * linear, var, {-kInf, kLogUUpper}, s.rng);
  const double current = s.params.mixing.log_u[g];
  ++s.u_proposals;
  if (std::log(s.rng.uniform()) < u_log_acceptance_ratio(proposal, current, prior.a)) {
    s.params.mixing.log_u[g] = proposal;
    ++s.u_accepts;
  }

  // Random-walk refresh on the exact conditional. The independence proposal has
  // lighter tails than exp(a t) and can stall deep in the left tail.
  const double data_linear = linear - moments.mean / moments.variance;
  auto log_target = [&](double t) {
    return prior.a * t - std::exp(t) - 0.5 * sum_omega * t * t + data_linear * t;
  };
  const double from = s.params.mixing.log_u[g];
  const double to = from + std::sqrt(var) * s.rng.normal();
  if (to < kLogUUpper && std::log(s.rng.uniform()) < log_target(to) - log_target(from)) {
    s.params.mixing.log_u[g] = to;
  }
}

// Component means for every row: n x p for each g.
std::vector<MatrixXd> component_means(const ChainState& s) {
  const auto& x = s.data->x;
  std::vector<MatrixXd> means;
  means.reserve(static_cast<std::size_t>(s.G()));
  for (const auto& c : s.params.components) {
    MatrixXd mu = c.b.transpose().replicate(x.rows(), 1);
    if (x.cols() > 0) mu.noalias() += x * c.B.transpose();
    means.push_back(std::move(mu));
  }
  return means;
}

// Per (pattern, component) factorizations of the observed block and of the
// missing-given-observed conditional.
struct PatternCache {
  Eigen::LLT<MatrixXd> oo_llt;
  double log_det = 0.0;
  MatrixXd oo_precision;  // Sigma_oo^{-1}
  MatrixXd gain;          // Sigma_mo Sigma_oo^{-1}
  MatrixXd cond_chol;     // lower Cholesky factor of the Schur complement
};

std::vector<std::vector<PatternCache>> build_pattern_cache(const ChainState& s, bool need_precision,
                                                           bool need_conditional) {
  const auto& patterns = s.data->patterns;
  std::vector<std::vector<PatternCache>> cache(patterns.size(), std::vector<PatternCache>(s.params.components.size()));
  for (std::size_t pi = 0; pi < patterns.size(); ++pi) {
    const auto& obs = patterns[pi].obs;
    const auto& mis = patterns[pi].mis;
    for (std::size_t g = 0; g < s.params.components.size(); ++g) {
      const MatrixXd& sigma = s.params.components[g].sigma;
      auto& entry = cache[pi][g];
      if (!obs.empty()) {
        entry.oo_llt = robust_cholesky(sigma(obs, obs), "Sigma_oo");
        entry.log_det = 2.0 * entry.oo_llt.matrixLLT().diagonal().array().log().sum();
        if (need_precision) entry.oo_precision = entry.oo_llt.solve(MatrixXd::Identity(Index(obs.size()), Index(obs.size())));
      }
      if (need_conditional && !mis.empty()) {
        MatrixXd cov = sigma(mis, mis);
        if (!obs.empty()) {
          const MatrixXd gain_t = entry.oo_llt.solve(MatrixXd(sigma(obs, mis)));
          entry.gain = gain_t.transpose();
          cov.noalias() -= entry.gain * sigma(obs, mis);
          cov = 0.5 * (cov + cov.transpose()).eval();
        }
        entry.cond_chol = robust_cholesky(cov, "conditional covariance").matrixL();
      }
    }
  }
  return cache;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::Single: return "single";
    case InitStrategy::KMeans: return "kmeans";
    case InitStrategy::Random: return "random";
  }
  return "single";
}

InitStrategy parse_init_strategy(const std::string& s) {
  if (s == "single") return InitStrategy::Single;
  if (s == "kmeans") return InitStrategy::KMeans;
  if (s == "random") return InitStrategy::Random;
  throw ValidationError("gibbs", "unknown init strategy '" + s + "'");
}

void ChainConfig::validate() const {
  if (burn_in < 0) throw ValidationError("gibbs", "burn_in must be >= 0");
  if (keep < 1 || thin < 1 || m_imputations < 1) {
    throw ValidationError("gibbs", "keep, thin and m_imputations must be >= 1");
  }
  if (m_imputations > saved_draws()) throw ValidationError("gibbs", "m_imputations must not exceed keep / thin");
  if (log_every < 0) throw ValidationError("gibbs", "log_every must be >= 0");
}

nlohmann::json ChainConfig::to_json() const {
  return {{"burn_in", burn_in},
          {"keep", keep},
          {"thin", thin},
          {"m_imputations", m_imputations},
          {"init", to_string(init)},
          {"standardize", standardize}};
}

ChainData ChainData::from_dataset(const Dataset& data, bool standardize) {
  data.validate();
  ChainData cd;
  const Index n = data.n(), p = data.p(), q = data.q();
  cd.kinds = data.kinds;
  cd.delta = data.delta;
  cd.x_center = VectorXd::Zero(q);
  cd.x_scale = VectorXd::Ones(q);
  cd.y_center = VectorXd::Zero(p);
  cd.y_scale = VectorXd::Ones(p);
  if (standardize) {
    for (Index j = 0; j < q; ++j) {
      const double mean = data.x.col(j).mean();
      const double var = n > 1 ? (data.x.col(j).array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
      cd.x_center[j] = mean;
      if (var > 0.0) cd.x_scale[j] = std::sqrt(var);
    }
    for (Index k = 0; k < p; ++k) {
      if (data.kinds[static_cast<std::size_t>(k)].is_discrete()) continue;
      double sum = 0.0, sum2 = 0.0;
      Index cnt = 0;
      for (Index i = 0; i < n; ++i) {
        if (!data.observed(i, k)) continue;
        sum += data.y(i, k);
        ++cnt;
      }
      if (cnt < 2) continue;
      const double mean = sum / static_cast<double>(cnt);
      for (Index i = 0; i < n; ++i)
        if (data.observed(i, k)) sum2 += (data.y(i, k) - mean) * (data.y(i, k) - mean);
      const double var = sum2 / static_cast<double>(cnt - 1);
      cd.y_center[k] = mean;
      if (var > 0.0) cd.y_scale[k] = std::sqrt(var);
    }
  }
  cd.x = (data.x.rowwise() - cd.x_center.transpose()).array().rowwise() / cd.x_scale.transpose().array();
  cd.y = data.y;
  for (Index k = 0; k < p; ++k) {
    for (Index i = 0; i < n; ++i) {
      cd.y(i, k) = data.observed(i, k) ? (data.y(i, k) - cd.y_center[k]) / cd.y_scale[k]
                                       : std::numeric_limits<double>::quiet_NaN();
    }
  }
  std::map<std::vector<std::uint8_t>, int> ids;
  cd.row_pattern.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    std::vector<std::uint8_t> key(static_cast<std::size_t>(p));
    for (Index k = 0; k < p; ++k) key[static_cast<std::size_t>(k)] = data.delta(i, k);
    auto [it, inserted] = ids.emplace(key, static_cast<int>(cd.patterns.size()));
    if (inserted) cd.patterns.push_back(split_pattern(data, i));
    cd.row_pattern[static_cast<std::size_t>(i)] = it->second;
  }
  return cd;
}

double ChainData::to_response(Index k, double latent) const {
  const auto& kind = kinds[static_cast<std::size_t>(k)];
  if (kind.is_discrete()) return kind.to_response(latent);
  return y_center[k] + y_scale[k] * latent;
}

void ChainState::check_invariants() const {
  const auto& d = *data;
  for (int zi : z) {
    if (zi < 0 || zi >= G()) throw NumericalError("gibbs", "component index out of range");
  }
  if (!(omega.array() > 0.0).all() || !omega.allFinite()) {
    throw NumericalError("gibbs", "Polya-Gamma latents must be positive and finite");
  }
  for (Index k = 0; k < d.p(); ++k) {
    const auto& kind = d.kinds[static_cast<std::size_t>(k)];
    for (Index i = 0; i < d.n(); ++i) {
      if (!std::isfinite(y_star(i, k))) throw NumericalError("gibbs", "non-finite latent response");
      if (!d.delta(i, k)) continue;
      if (!kind.is_discrete()) {
        if (y_star(i, k) != d.y(i, k)) throw NumericalError("gibbs", "observed continuous cell was modified");
      } else if (!kind.interval(d.y(i, k)).contains(y_star(i, k))) {
        throw NumericalError("gibbs", "latent value outside the interval of its observed category");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

std::vector<int> kmeans_labels(const MatrixXd& features, int G, RngStream& rng) {
  const Index n = features.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (G == 1 || n == 0) return labels;
  // k-means++ seeding.
  MatrixXd centers(G, features.cols());
  centers.row(0) = features.row(static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n)));
  VectorXd d2 = (features.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int g = 1; g < G; ++g) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      pick = sample_categorical(std::span<const double>(d2.data(), static_cast<std::size_t>(n)), rng);
    } else {
      pick = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n));
    }
    centers.row(g) = features.row(pick);
    d2 = d2.cwiseMin((features.rowwise() - centers.row(g)).rowwise().squaredNorm());
  }
  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best;
      (centers.rowwise() - features.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    MatrixXd sums = MatrixXd::Zero(G, features.cols());
    VectorXd counts = VectorXd::Zero(G);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += features.row(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (int g = 0; g < G; ++g)
      if (counts[g] > 0) centers.row(g) = sums.row(g) / counts[g];
  }
  // Largest cluster goes to the reference component, which the gate cannot switch off.
  std::vector<int> size(static_cast<std::size_t>(G), 0), order(static_cast<std::size_t>(G));
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return size[a] > size[b]; });
  std::vector<int> rank(static_cast<std::size_t>(G));
  for (int r = 0; r < G; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
  for (int& l : labels) l = rank[static_cast<std::size_t>(l)];
  return labels;
}

}  // namespace

ChainState init_state(std::shared_ptr<const ChainData> data, int G, const PriorConfig& prior,
                      const ChainConfig& config, RngStream rng) {
  if (G < 1) throw ValidationError("gibbs", "G must be >= 1");
  const Index n = data->n(), p = data->p(), q = data->q();
  prior.validate(p, q);
  ChainState s;
  s.data = data;
  s.rng = rng;
  s.fault = config.fault;

  // Latent responses.
  s.y_star.resize(n, p);
  for (Index k = 0; k < p; ++k) {
    const auto& kind = data->kinds[static_cast<std::size_t>(k)];
    for (Index i = 0; i < n; ++i) {
      if (!data->delta(i, k)) {
        s.y_star(i, k) = s.rng.normal();
      } else if (kind.is_discrete()) {
        s.y_star(i, k) = sample_truncated_normal(0.0, 1.0, kind.interval(data->y(i, k)), s.rng);
      } else {
        s.y_star(i, k) = data->y(i, k);
      }
    }
  }

  // Allocations.
  if (config.init == InitStrategy::Single) {
    s.z.assign(static_cast<std::size_t>(n), 0);
  } else if (config.init == InitStrategy::Random) {
    s.z.resize(static_cast<std::size_t>(n));
    for (auto& zi : s.z) zi = static_cast<int>(s.rng.next_u64() % static_cast<std::uint64_t>(G));
  } else {
    MatrixXd features(n, q + p);
    features.leftCols(q) = data->x;
    for (Index k = 0; k < p; ++k) {
      double sum = 0.0;
      Index cnt = 0;
      for (Index i = 0; i < n; ++i)
        if (data->delta(i, k)) sum += data->y(i, k), ++cnt;
      const double fill = cnt ? sum / static_cast<double>(cnt) : 0.0;
      for (Index i = 0; i < n; ++i) features(i, q + k) = data->delta(i, k) ? data->y(i, k) : fill;
    }
    s.z = kmeans_labels(features, G, s.rng);
  }

  // Parameters.
  s.params.mixing.log_u = VectorXd::Zero(G);
  s.params.mixing.alpha = MatrixXd::Zero(G, q);
  MatrixXd design(n, q + 1);
  design.col(0).setOnes();
  design.rightCols(q) = data->x;
  for (int g = 0; g < G; ++g) {
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
      if (s.z[static_cast<std::size_t>(i)] == g) rows.push_back(i);
    ComponentParams comp{VectorXd::Zero(p), MatrixXd::Zero(p, q), MatrixXd::Identity(p, p)};
    if (static_cast<Index>(rows.size()) > q + 1) {
      const MatrixXd xg = design(rows, Eigen::all);
      const MatrixXd yg = s.y_star(rows, Eigen::all);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(xg);
      if (qr.rank() == q + 1) {
        const MatrixXd coef = qr.solve(yg);  // (q+1) x p
        comp.b = coef.row(0).transpose();
        comp.B = coef.bottomRows(q).transpose();
        const MatrixXd resid = yg - xg * coef;
        if (static_cast<Index>(rows.size()) > q + 1 + p) {
          MatrixXd cov = resid.transpose() * resid / static_cast<double>(rows.size() - static_cast<std::size_t>(q) - 1);
          cov = 0.5 * (cov + cov.transpose()).eval();
          Eigen::LLT<MatrixXd> llt(cov);
          if (llt.info() == Eigen::Success && cov.diagonal().minCoeff() > 1e-6) comp.sigma = cov;
        }
      }
    }
    s.params.components.push_back(std::move(comp));
  }
  s.omega = MatrixXd::Ones(n, G);
  return s;
}

// ---------------------------------------------------------------------------
// Gate updates

double u_log_acceptance_ratio(double log_u_proposed, double log_u_current, double a) {
  const auto m = log_gamma_moments(a);
  // Target on the log scale: Ga(e^t; a, 1) e^t ∝ exp(a t - e^t).
  auto log_target = [a](double t) { return a * t - std::exp(t); };
  auto log_approx = [&m](double t) { return normal_logpdf(t, m.mean, m.variance); };
  return (log_target(log_u_proposed) - log_target(log_u_current)) -
         (log_approx(log_u_proposed) - log_approx(log_u_current));
}

void update_omega(ChainState& s) {
  const MatrixXd eta = gate_eta(s);
  for (int g = 1; g < s.G(); ++g) draw_omega_column(s, eta, gate_offset(eta, g), g);
}

void update_alpha(ChainState& s, const PriorConfig& prior) {
  for (int g = 1; g < s.G(); ++g) {
    const MatrixXd eta = gate_eta(s);
    draw_alpha(s, prior, gate_offset(eta, g), g);
  }
}

void update_u(ChainState& s, const PriorConfig& prior) {
  for (int g = 1; g < s.G(); ++g) {
    const MatrixXd eta = gate_eta(s);
    draw_log_u(s, prior, gate_offset(eta, g), g);
  }
}

void update_mixing(ChainState& s, const PriorConfig& prior) {
  for (int g = 1; g < s.G(); ++g) {
    const MatrixXd eta = gate_eta(s);
    const VectorXd offset = gate_offset(eta, g);
    draw_omega_column(s, eta, offset, g);
    draw_alpha(s, prior, offset, g);
    draw_log_u(s, prior, offset, g);
  }
}

// ---------------------------------------------------------------------------
// Component updates

void update_regression(ChainState& s, const PriorConfig& prior) {
  const auto& x = s.data->x;
  const Index n = x.rows(), q = x.cols(), p = s.y_star.cols();
  const Index k = q + 1;
  const MatrixXd prior_precision =
      kron(spd_inverse(prior.coefficient_col_cov(), "coefficient prior"), spd_inverse(prior.s_b2, "S_B2"));
  VectorXd xs(k);
  for (int g = 0; g < s.G(); ++g) {
    MatrixXd xtx = MatrixXd::Zero(k, k);
    MatrixXd ytx = MatrixXd::Zero(p, k);
    for (Index i = 0; i < n; ++i) {
      if (s.z[static_cast<std::size_t>(i)] != g) continue;
      xs[0] = 1.0;
      xs.tail(q) = x.row(i).transpose();
      xtx.noalias() += xs * xs.transpose();
      ytx.noalias() += s.y_star.row(i).transpose() * xs.transpose();
    }
    auto& comp = s.params.components[static_cast<std::size_t>(g)];
    const auto sigma_llt = robust_cholesky(comp.sigma, "Sigma_g");
    const MatrixXd sigma_inv = sigma_llt.solve(MatrixXd::Identity(p, p));
    const MatrixXd precision = prior_precision + kron(xtx, sigma_inv);
    const MatrixXd lin = sigma_inv * ytx;  // vec() is column-major, matching kron ordering
    const VectorXd draw = sample_gaussian_canonical(
        precision, Eigen::Map<const VectorXd>(lin.data(), lin.size()), s.rng, "coefficient precision");
    const Eigen::Map<const MatrixXd> coef(draw.data(), p, k);
    comp.b = coef.col(0);
    comp.B = coef.rightCols(q);
  }
}

void update_sigma(ChainState& s, const PriorConfig& prior) {
  const auto& x = s.data->x;
  const Index n = x.rows(), p = s.y_star.cols();
  for (int g = 0; g < s.G(); ++g) {
    auto& comp = s.params.components[static_cast<std::size_t>(g)];
    MatrixXd scale = prior.s_sigma;
    double count = 0.0;
    VectorXd r(p);
    for (Index i = 0; i < n; ++i) {
      if (s.z[static_cast<std::size_t>(i)] != g) continue;
      r = s.y_star.row(i).transpose() - comp.b;
      if (x.cols() > 0) r.noalias() -= comp.B * x.row(i).transpose();
      scale.noalias() += r * r.transpose();
      count += 1.0;
    }
    comp.sigma = sample_inverse_wishart(prior.nu + count, scale, s.rng);
  }
}

void update_z(ChainState& s) {
  const auto& d = *s.data;
  const Index n = d.n();
  const int G = s.G();
  const auto cache = build_pattern_cache(s, false, false);
  const auto means = component_means(s);
  const MatrixXd eta = gate_eta(s);
  VectorXd logw(G);
  VectorXd r(d.p());
  double loglik = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int pid = d.row_pattern[static_cast<std::size_t>(i)];
    const auto& obs = d.patterns[static_cast<std::size_t>(pid)].obs;
    const Index no = static_cast<Index>(obs.size());
    const double lse = log_sum_exp(eta.row(i).transpose());
    for (int g = 0; g < G; ++g) {
      logw[g] = eta(i, g) - lse;
      if (no == 0) continue;
      const auto& entry = cache[static_cast<std::size_t>(pid)][static_cast<std::size_t>(g)];
      auto rv = r.head(no);
      for (Index a = 0; a < no; ++a) rv[a] = s.y_star(i, obs[a]) - means[static_cast<std::size_t>(g)](i, obs[a]);
      entry.oo_llt.matrixL().solveInPlace(rv);
      logw[g] += -0.5 * (static_cast<double>(no) * kLogTwoPi + entry.log_det + rv.squaredNorm());
    }
    if (no > 0) loglik += log_sum_exp(logw);
    s.z[static_cast<std::size_t>(i)] =
        sample_categorical_log(std::span<const double>(logw.data(), static_cast<std::size_t>(G)), s.rng);
  }
  s.last_loglik = loglik;
}

void update_ystar_observed(ChainState& s) {
  const auto& d = *s.data;
  const Index p = d.p();
  bool any_discrete = false;
  for (const auto& kind : d.kinds) any_discrete = any_discrete || kind.is_discrete();
  if (!any_discrete) return;
  const auto cache = build_pattern_cache(s, true, false);
  const auto means = component_means(s);
  VectorXd resid(p);
  for (Index i = 0; i < d.n(); ++i) {
    const int pid = d.row_pattern[static_cast<std::size_t>(i)];
    const auto& obs = d.patterns[static_cast<std::size_t>(pid)].obs;
    const Index no = static_cast<Index>(obs.size());
    const int g = s.z[static_cast<std::size_t>(i)];
    const auto& mu = means[static_cast<std::size_t>(g)];
    const MatrixXd& lambda = cache[static_cast<std::size_t>(pid)][static_cast<std::size_t>(g)].oo_precision;
    for (Index a = 0; a < no; ++a) {
      const int k = obs[a];
      const auto& kind = d.kinds[static_cast<std::size_t>(k)];
      if (!kind.is_discrete()) continue;
      for (Index b = 0; b < no; ++b) resid[b] = s.y_star(i, obs[b]) - mu(i, obs[b]);
      // Conditional of coordinate a given the other observed coordinates, from the precision.
      double shift = 0.0;
      for (Index b = 0; b < no; ++b)
        if (b != a) shift += lambda(a, b) * resid[b];
      const double var = 1.0 / lambda(a, a);
      const double mean = mu(i, k) - var * shift;
      s.y_star(i, k) = sample_truncated_normal(mean, var, kind.interval(d.y(i, k)), s.rng);
    }
  }
}

void update_ymis(ChainState& s) {
  const auto& d = *s.data;
  if ((d.delta.array() != 0).all()) return;
  const auto cache = build_pattern_cache(s, false, true);
  const auto means = component_means(s);
  VectorXd resid(d.p()), noise(d.p()), draw(d.p());
  for (Index i = 0; i < d.n(); ++i) {
    const int pid = d.row_pattern[static_cast<std::size_t>(i)];
    const auto& pattern = d.patterns[static_cast<std::size_t>(pid)];
    const Index nm = static_cast<Index>(pattern.mis.size());
    if (nm == 0) continue;
    const Index no = static_cast<Index>(pattern.obs.size());
    const int g = s.z[static_cast<std::size_t>(i)];
    const auto& mu = means[static_cast<std::size_t>(g)];
    const auto& entry = cache[static_cast<std::size_t>(pid)][static_cast<std::size_t>(g)];
    auto dv = draw.head(nm);
    for (Index a = 0; a < nm; ++a) dv[a] = mu(i, pattern.mis[a]);
    if (no > 0) {
      auto rv = resid.head(no);
      for (Index b = 0; b < no; ++b) rv[b] = s.y_star(i, pattern.obs[b]) - mu(i, pattern.obs[b]);
      dv.noalias() += entry.gain * rv;
    }
    auto nv = noise.head(nm);
    for (Index a = 0; a < nm; ++a) nv[a] = s.rng.normal();
    dv.noalias() += entry.cond_chol.triangularView<Eigen::Lower>() * nv;
    for (Index a = 0; a < nm; ++a) s.y_star(i, pattern.mis[a]) = dv[a];
  }
}

void sweep(ChainState& s, const PriorConfig& prior) {
  update_mixing(s, prior);
  update_regression(s, prior);
  update_sigma(s, prior);
  update_z(s);
  update_ystar_observed(s);
  update_ymis(s);
  ++s.iteration;
}

int non_null_count(const std::vector<int>& z, int G) {
  std::vector<char> seen(static_cast<std::size_t>(G), 0);
  int count = 0;
  for (int zi : z) {
    if (zi >= 0 && zi < G && !seen[static_cast<std::size_t>(zi)]) {
      seen[static_cast<std::size_t>(zi)] = 1;
      ++count;
    }
  }
  return count;
}

int non_null_count(const ChainState& state) { return non_null_count(state.z, state.G()); }

MatrixXd completed_responses(const ChainState& s, const Dataset& original) {
  MatrixXd y = original.y;
  for (Index k = 0; k < y.cols(); ++k)
    for (Index i = 0; i < y.rows(); ++i)
      if (!original.observed(i, k)) y(i, k) = s.data->to_response(k, s.y_star(i, k));
  return y;
}

Dataset completed_dataset(const ChainState& s, const Dataset& original) {
  Dataset out = original;
  out.y = completed_responses(s, original);
  out.delta.setOnes();
  return out;
}

// ---------------------------------------------------------------------------

void ChainDiagnostics::write_trace_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("gibbs", "cannot write " + path.string());
  csv::write_row(out, {"iteration", "loglik", "non_null_count"});
  for (std::size_t t = 0; t < iteration.size(); ++t) {
    csv::write_row(out, {std::to_string(iteration[t]), csv::format_double(loglik[t]), std::to_string(non_null[t])});
  }
}

nlohmann::json ChainDiagnostics::summary() const {
  return {{"iterations", iteration.size()},
          {"mean_non_null_kept", mean_non_null_kept},
          {"u_acceptance_rate", u_acceptance_rate},
          {"final_loglik", loglik.empty() ? 0.0 : loglik.back()}};
}

ChainResult run_chain(const Dataset& data, int G, const PriorConfig& prior, const ChainConfig& config,
                      RngStream rng) {
  config.validate();
  auto cd = std::make_shared<const ChainData>(ChainData::from_dataset(data, config.standardize));
  ChainState s = init_state(cd, G, prior, config, rng);

  const long saved_total = config.saved_draws();
  std::set<long> pick;
  for (long j = 0; j < config.m_imputations; ++j) pick.insert((j + 1) * saved_total / config.m_imputations - 1);

  ChainResult result;
  result.imputed_mean = MatrixXd::Zero(data.n(), data.p());
  double non_null_sum = 0.0;
  const long total = config.burn_in + config.keep;
  for (long it = 1; it <= total; ++it) {
    try {
      sweep(s, prior);
    } catch (const Error& e) {
      throw NumericalError(e.module(), "iteration " + std::to_string(it) + ": " + e.what());
    }
    const int nn = non_null_count(s);
    result.diagnostics.iteration.push_back(it);
    result.diagnostics.loglik.push_back(s.last_loglik);
    result.diagnostics.non_null.push_back(nn);
    if (config.log_every > 0 && it % config.log_every == 0) {
      std::cerr << nlohmann::json{{"event", "chain_checkpoint"},
                                  {"iteration", it},
                                  {"loglik", s.last_loglik},
                                  {"non_null", nn}}
                       .dump()
                << '\n';
    }
    if (it <= config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    const long ordinal = (it - config.burn_in) / config.thin - 1;
    const MatrixXd completed = completed_responses(s, data);
    result.imputed_mean += completed;
    non_null_sum += nn;
    if (pick.count(ordinal)) {
      Dataset ds = data;
      ds.y = completed;
      ds.delta.setOnes();
      result.draws.datasets.push_back(std::move(ds));
      result.draws.source_iterations.push_back(it);
    }
  }
  result.imputed_mean /= static_cast<double>(saved_total);
  result.diagnostics.mean_non_null_kept = non_null_sum / static_cast<double>(saved_total);
  result.diagnostics.u_acceptance_rate =
      s.u_proposals ? static_cast<double>(s.u_accepts) / static_cast<double>(s.u_proposals) : 0.0;
  result.final_params = s.params;
  result.final_state = std::move(s);
  return result;
}

// ---------------------------------------------------------------------------
// Imputation sources

MatrixXd PrecollectedSource::next(RngStream&) {
  if (cursor_ >= draws_.m()) throw ValidationError("ilb", "pre-collected imputations exhausted");
  return draws_.datasets[cursor_++].y;
}

ChainSource::ChainSource(const Dataset& data, int G, const PriorConfig& prior, const ChainConfig& config,
                         long thin, RngStream rng)
    : data_(data), prior_(prior), thin_(thin) {
  if (thin < 1) throw ValidationError("gibbs", "ILB thinning must be >= 1");
  auto cd = std::make_shared<const ChainData>(ChainData::from_dataset(data, config.standardize));
  state_ = init_state(cd, G, prior, config, rng);
  for (long it = 0; it < config.burn_in; ++it) sweep(state_, prior_);
}

MatrixXd ChainSource::next(RngStream&) {
  for (long t = 0; t < thin_; ++t) sweep(state_, prior_);
  return completed_responses(state_, data_);
}

FixedParamsSource::FixedParamsSource(const ChainState& snapshot, const Dataset& data)
    : snapshot_(snapshot), data_(data) {}

MatrixXd FixedParamsSource::next(RngStream& rng) {
  const auto& d = *snapshot_.data;
  MatrixXd y = data_.y;
  for (Index i = 0; i < d.n(); ++i) {
    const auto& pattern = d.patterns[static_cast<std::size_t>(d.row_pattern[static_cast<std::size_t>(i)])];
    if (pattern.mis.empty()) continue;
    const VectorXd x = d.x.row(i).transpose();
    const VectorXd y_obs = snapshot_.y_star.row(i)(pattern.obs).transpose();
    const VectorXd draw = impute_row(snapshot_.params, x, y_obs, pattern.obs, pattern.mis, rng);
    for (std::size_t a = 0; a < pattern.mis.size(); ++a) {
      y(i, pattern.mis[a]) = d.to_response(pattern.mis[a], draw[static_cast<Index>(a)]);
    }
  }
  return y;
}

CompleteDataSource::CompleteDataSource(const Dataset& data) : data_(data) {
  if (data.missing_count() != 0) throw ValidationError("ilb", "complete-data source given data with missing cells");
}

MatrixXd CompleteDataSource::next(RngStream&) { return data_.y; }

}  // namespace mixim
