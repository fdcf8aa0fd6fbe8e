#include "mixim/ilb.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "mixim/csv.hpp"
#include "mixim/errors.hpp"
#include "mixim/parallel.hpp"
#include "mixim/stats.hpp"

namespace mixim {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double check_loss(double r, double tau) { return r * (tau - (r < 0.0 ? 1.0 : 0.0)); }

double weight_total(const VectorXd& w) {
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("ilb", "weights must have a positive finite sum");
  return s;
}

void check_column(Index c, Index cols) {
  if (c < 0 || c >= cols) throw ValidationError("ilb", "loss column " + std::to_string(c) + " out of range");
}

}  // namespace

Index loss_dimension(const LossSpec& loss) {
  return std::visit(overloaded{[](const MeanLoss&) -> Index { return 1; },
                               [](const QuantileLoss&) -> Index { return 1; },
                               [](const QuadraticRegressionLoss&) -> Index { return 3; },
                               [](const CustomLoss& c) -> Index { return c.start.size(); }},
                    loss);
}

std::string loss_to_string(const LossSpec& loss, const std::vector<std::string>& columns) {
  auto name = [&](Index c) {
    return c >= 0 && c < static_cast<Index>(columns.size()) ? columns[static_cast<std::size_t>(c)] : std::to_string(c);
  };
  return std::visit(overloaded{[&](const MeanLoss& m) { return "mean:" + name(m.column); },
                               [&](const QuantileLoss& q) { return "quantile:" + name(q.column) + ":" + csv::format_double(q.tau); },
                               [&](const QuadraticRegressionLoss& r) {
                                 return "quadreg:" + name(r.y_column) + ":" + name(r.x_column);
                               },
                               [](const CustomLoss& c) { return c.name; }},
                    loss);
}

void validate_loss(const LossSpec& loss, Index table_cols) {
  std::visit(overloaded{[&](const MeanLoss& m) { check_column(m.column, table_cols); },
                        [&](const QuantileLoss& q) {
                          check_column(q.column, table_cols);
                          if (!(q.tau > 0.0 && q.tau < 1.0)) throw ValidationError("ilb", "tau must lie in (0, 1)");
                        },
                        [&](const QuadraticRegressionLoss& r) {
                          check_column(r.y_column, table_cols);
                          check_column(r.x_column, table_cols);
                        },
                        [](const CustomLoss& c) {
                          if (!c.loss || c.start.size() == 0) {
                            throw ValidationError("ilb", "custom loss needs an evaluator and a start point");
                          }
                        }},
             loss);
}

LossSpec parse_loss(const std::string& text, const std::vector<std::string>& columns) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  auto column = [&](const std::string& s) -> Index {
    const auto it = std::find(columns.begin(), columns.end(), s);
    if (it != columns.end()) return it - columns.begin();
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError("ilb", "unknown loss column '" + s + "'");
  };
  const std::string& kind = parts[0];
  if (kind == "mean" && parts.size() == 2) return MeanLoss{column(parts[1])};
  if (kind == "quantile" && parts.size() == 3) {
    double tau = 0.0;
    try {
      std::size_t used = 0;
      tau = std::stod(parts[2], &used);
      if (used != parts[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("ilb", "malformed tau '" + parts[2] + "'");
    }
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("ilb", "tau must lie in (0, 1), got " + parts[2]);
    return QuantileLoss{column(parts[1]), tau};
  }
  if (kind == "quadreg" && parts.size() == 3) return QuadraticRegressionLoss{column(parts[1]), column(parts[2])};
  throw ValidationError("ilb", "malformed loss spec '" + text + "'");
}

// ---------------------------------------------------------------------------

double minimize_weighted_mean(const MatrixXd& rows, const VectorXd& weights, Index column) {
  check_column(column, rows.cols());
  const double total = weight_total(weights);
  return weights.dot(rows.col(column)) / total;
}

double minimize_weighted_quantile(const MatrixXd& rows, const VectorXd& weights, Index column, double tau) {
  check_column(column, rows.cols());
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("ilb", "tau must lie in (0, 1)");
  const double total = weight_total(weights);
  std::vector<Index> order(static_cast<std::size_t>(rows.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto col = rows.col(column);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return col[a] < col[b]; });
  double cum = 0.0;
  for (Index i : order) {
    cum += weights[i];
    if (cum / total >= tau) return col[i];
  }
  return col[order.back()];
}

Eigen::Vector3d minimize_weighted_quadratic_regression(const MatrixXd& rows, const VectorXd& weights,
                                                       Index y_column, Index x_column) {
  check_column(y_column, rows.cols());
  check_column(x_column, rows.cols());
  weight_total(weights);
  std::vector<double> distinct;
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
  for (Index i = 0; i < rows.rows(); ++i) {
    if (weights[i] <= 0.0) continue;
    const double x = rows(i, x_column);
    const Eigen::Vector3d d(1.0, x, x * x);
    a.noalias() += weights[i] * d * d.transpose();
    h.noalias() += weights[i] * rows(i, y_column) * d;
    if (distinct.size() < 3 && std::find(distinct.begin(), distinct.end(), x) == distinct.end()) distinct.push_back(x);
  }
  if (distinct.size() < 3) {
    throw ValidationError("ilb", "quadratic regression needs at least 3 distinct regressor values");
  }
  Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("ilb", "quadratic regression normal equations singular");
  return llt.solve(h);
}

double weighted_loss(const LossSpec& loss, const VectorXd& theta, const MatrixXd& rows, const VectorXd& weights) {
  return std::visit(
      overloaded{[&](const MeanLoss& m) {
                   return weights.dot((rows.col(m.column).array() - theta[0]).square().matrix());
                 },
                 [&](const QuantileLoss& q) {
                   double s = 0.0;
                   for (Index i = 0; i < rows.rows(); ++i) s += weights[i] * check_loss(rows(i, q.column) - theta[0], q.tau);
                   return s;
                 },
                 [&](const QuadraticRegressionLoss& r) {
                   const auto x = rows.col(r.x_column).array();
                   const auto res = rows.col(r.y_column).array() - theta[0] - theta[1] * x - theta[2] * x.square();
                   return weights.dot(res.square().matrix());
                 },
                 [&](const CustomLoss& c) {
                   double s = 0.0;
                   for (Index i = 0; i < rows.rows(); ++i) s += weights[i] * c.loss(theta, rows.row(i));
                   return s;
                 }},
      loss);
}

VectorXd minimize_loss(const LossSpec& loss, const MatrixXd& rows, const VectorXd& weights, const PriorWeight* prior,
                       double w0) {
  VectorXd theta = std::visit(
      overloaded{[&](const MeanLoss& m) -> VectorXd { return VectorXd::Constant(1, minimize_weighted_mean(rows, weights, m.column)); },
                 [&](const QuantileLoss& q) -> VectorXd {
                   return VectorXd::Constant(1, minimize_weighted_quantile(rows, weights, q.column, q.tau));
                 },
                 [&](const QuadraticRegressionLoss& r) -> VectorXd {
                   return VectorXd(minimize_weighted_quadratic_regression(rows, weights, r.y_column, r.x_column));
                 },
                 [&](const CustomLoss& c) -> VectorXd {
                   const auto res = nelder_mead([&](const VectorXd& t) { return weighted_loss(loss, t, rows, weights); },
                                                c.start);
                   if (!res.converged) throw NumericalError("ilb", "custom loss minimization did not converge");
                   return res.x;
                 }},
      loss);
  if (prior == nullptr) return theta;
  if (!(prior->omega > 0.0)) throw ValidationError("ilb", "prior weight omega must be positive");
  auto objective = [&](const VectorXd& t) {
    return prior->omega * weighted_loss(loss, t, rows, weights) - w0 * prior->log_prior(t);
  };
  const double scale = std::max(1e-3, 0.1 * theta.norm());
  const auto res = nelder_mead(objective, theta, scale);
  if (!res.converged) throw NumericalError("ilb", "prior-weighted minimization did not converge");
  return res.x;
}

NelderMeadResult nelder_mead(const std::function<double(const VectorXd&)>& f, const VectorXd& start, double step,
                             double tol, int max_iter) {
  const Index d = start.size();
  std::vector<VectorXd> simplex(static_cast<std::size_t>(d + 1), start);
  std::vector<double> values(static_cast<std::size_t>(d + 1));
  for (Index j = 0; j < d; ++j) simplex[static_cast<std::size_t>(j + 1)][j] += step;
  for (std::size_t j = 0; j < simplex.size(); ++j) values[j] = f(simplex[j]);
  std::vector<std::size_t> order(simplex.size());
  NelderMeadResult out;
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    out.iterations = it;
    double spread = 0.0;
    for (const auto& v : simplex) spread = std::max(spread, (v - simplex[best]).cwiseAbs().maxCoeff());
    if (std::abs(values[worst] - values[best]) <= tol * (std::abs(values[best]) + tol) && spread <= 1e-8 * (1.0 + simplex[best].norm())) {
      out.converged = true;
      break;
    }
    VectorXd centroid = VectorXd::Zero(d);
    for (std::size_t j = 0; j < simplex.size(); ++j)
      if (j != worst) centroid += simplex[j];
    centroid /= static_cast<double>(d);
    const VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded, values[worst] = fe;
      } else {
        simplex[worst] = reflected, values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected, values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const VectorXd contracted =
        outside ? VectorXd(centroid + 0.5 * (reflected - centroid)) : VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = f(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted, values[worst] = fc;
      continue;
    }
    for (std::size_t j = 0; j < simplex.size(); ++j) {
      if (j == best) continue;
      simplex[j] = simplex[best] + 0.5 * (simplex[j] - simplex[best]);
      values[j] = f(simplex[j]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  out.x = simplex[best];
  out.value = values[best];
  return out;
}

// ---------------------------------------------------------------------------

IlbSummary summarize(const MatrixXd& samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("ilb", "level must lie in (0, 1)");
  if (samples.rows() < 2) throw ValidationError("ilb", "summaries need at least 2 replicates");
  const Index d = samples.cols();
  IlbSummary s;
  s.level = level;
  s.mean = samples.colwise().mean().transpose();
  s.sd.resize(d);
  s.lower.resize(d);
  s.upper.resize(d);
  for (Index j = 0; j < d; ++j) {
    std::vector<double> col(samples.col(j).data(), samples.col(j).data() + samples.rows());
    s.sd[j] = std::sqrt(stats::variance(col));
    std::sort(col.begin(), col.end());
    s.lower[j] = stats::quantile_sorted(col, 0.5 * (1.0 - level));
    s.upper[j] = stats::quantile_sorted(col, 0.5 * (1.0 + level));
  }
  return s;
}

MatrixXd completed_table(const Dataset& data, const MatrixXd& y) {
  MatrixXd t(data.n(), data.q() + y.cols());
  t << data.x, y;
  return t;
}

IlbResult ilb_run(ImputationSource& source, const Dataset& data, const LossSpec& loss, const IlbConfig& config,
                  RngStream rng, const PriorWeight* prior) {
  if (config.B < 1) throw ValidationError("ilb", "B must be >= 1");
  if (config.chunk < 1) throw ValidationError("ilb", "chunk must be >= 1");
  validate_loss(loss, data.q() + data.p());
  IlbResult result;
  result.loss = loss_to_string(loss);
  result.samples.resize(config.B, loss_dimension(loss));
  RngStream source_rng = rng.substream(~std::uint64_t{0});
  const Index n = data.n();
  for (long first = 0; first < config.B; first += config.chunk) {
    const long count = std::min(config.chunk, config.B - first);
    std::vector<MatrixXd> tables;
    tables.reserve(static_cast<std::size_t>(count));
    for (long b = 0; b < count; ++b) tables.push_back(completed_table(data, source.next(source_rng)));
    parallel_for(static_cast<std::size_t>(count), config.threads, [&](std::size_t j) {
      const long b = first + static_cast<long>(j);
      RngStream wr = rng.substream(static_cast<std::uint64_t>(b));
      VectorXd w(n);
      if (config.unit_weights) {
        w.setOnes();
      } else {
        for (Index i = 0; i < n; ++i) w[i] = wr.exponential();
      }
      const double w0 = prior ? (config.unit_weights ? 1.0 : wr.exponential()) : 0.0;
      result.samples.row(b) = minimize_loss(loss, tables[j], w, prior, w0).transpose();
    });
  }
  return result;
}

void write_ilb_csv(const IlbResult& result, const std::filesystem::path& path,
                   const std::vector<std::string>& coordinate_names) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("ilb", "cannot write " + path.string());
  std::vector<std::string> header{"replicate"};
  for (Index j = 0; j < result.samples.cols(); ++j) {
    header.push_back(j < static_cast<Index>(coordinate_names.size()) ? coordinate_names[static_cast<std::size_t>(j)]
                                                                     : "theta" + std::to_string(j));
  }
  csv::write_row(out, header);
  for (Index b = 0; b < result.samples.rows(); ++b) {
    std::vector<std::string> row{std::to_string(b + 1)};
    for (Index j = 0; j < result.samples.cols(); ++j) row.push_back(csv::format_double(result.samples(b, j)));
    csv::write_row(out, row);
  }
  if (!out) throw IoError("ilb", "write failed for " + path.string());
}

nlohmann::json ilb_summary_json(const IlbResult& result, double level) {
  const auto s = result.summary(level);
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"loss_spec", result.loss},
          {"B", result.samples.rows()},
          {"level", level},
          {"mean", vec(s.mean)},
          {"sd", vec(s.sd)},
          {"interval", {{"lower", vec(s.lower)}, {"upper", vec(s.upper)}}}};
}

}  // namespace mixim
