#include "sgid/harmonics.hpp"

#include <Eigen/LU>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "sgid/errors.hpp"
#include "sgid/linalg.hpp"
#include "sgid/parallel.hpp"

namespace sgid {

GHModel gh_fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, double epsilon_star,
               const GHOptions& options) {
  const Eigen::Index n = inputs.rows();
  if (targets.rows() != n) throw DomainError("inputs and targets have different row counts");
  if (n < 2 || inputs.cols() < 1 || targets.cols() < 1) throw DomainError("empty regression problem");
  if (!inputs.allFinite() || !targets.allFinite()) throw DomainError("regression data is not finite");
  if (!(epsilon_star > 0.0)) throw DomainError("kernel scale must be positive");
  if (!(options.delta > 0.0 && options.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  if (!options.delta_rule && (options.retain == 0 || options.retain > static_cast<std::size_t>(n))) {
    throw DomainError("retained eigenpair count must lie in [1, N_train]");
  }

  const Eigen::MatrixXd w = (-squared_distances(inputs) / (2.0 * epsilon_star)).array().exp().matrix();
  const std::size_t want = options.delta_rule ? static_cast<std::size_t>(n) : options.retain;
  SymmetricEigen eig = top_eigenpairs(w, want);

  const double floor = options.delta * eig.values[0];
  Eigen::Index keep = 0;
  while (keep < eig.values.size() && eig.values[keep] > floor) ++keep;

  GHModel m;
  if (!options.delta_rule && static_cast<std::size_t>(keep) < want) {
    m.warnings.push_back("dropped " + std::to_string(want - static_cast<std::size_t>(keep)) +
                         " eigenpairs below delta sigma_0");
  }
  m.inputs = inputs;
  m.epsilon_star = epsilon_star;
  m.sigma = eig.values.head(keep);
  m.psi = eig.vectors.leftCols(keep);
  fix_signs(m.psi);
  m.coefficients = m.psi.transpose() * targets;
  m.weights = m.psi * m.sigma.cwiseInverse().asDiagonal() * m.coefficients;
  m.output_scaling = Scaling::identity(static_cast<std::size_t>(targets.cols()));
  return m;
}

namespace {

void check_point_dim(const GHModel& m, Eigen::Index d) {
  if (d != m.inputs.cols()) throw DomainError("evaluation point dimension does not match the model");
}

Eigen::VectorXd kernel_row(const GHModel& m, const Eigen::VectorXd& x) {
  const Eigen::VectorXd d2 = (m.inputs.rowwise() - x.transpose()).rowwise().squaredNorm();
  return (-d2 / (2.0 * m.epsilon_star)).array().exp().matrix();
}

}  // namespace

Eigen::VectorXd gh_predict_point(const GHModel& m, const Eigen::VectorXd& x) {
  check_point_dim(m, x.size());
  return m.weights.transpose() * kernel_row(m, x);
}

GHPrediction gh_predict(const GHModel& m, const Eigen::MatrixXd& x, std::size_t workers) {
  check_point_dim(m, x.cols());
  GHPrediction out;
  out.values.resize(x.rows(), m.coefficients.cols());
  out.nearest_sq_distance.resize(x.rows());
  parallel_for(static_cast<std::size_t>(x.rows()), workers, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd xi = x.row(r).transpose();
    out.values.row(r) = (m.weights.transpose() * kernel_row(m, xi)).transpose();
    out.nearest_sq_distance[r] = (m.inputs.rowwise() - xi.transpose()).rowwise().squaredNorm().minCoeff();
  });
  return out;
}

Eigen::MatrixXd gh_projection(const GHModel& m) { return m.psi * m.coefficients; }

Eigen::MatrixXd gh_gradient(const GHModel& m, const Eigen::VectorXd& x) {
  check_point_dim(m, x.size());
  const Eigen::VectorXd k = kernel_row(m, x);
  const Eigen::MatrixXd diff = m.inputs.rowwise() - x.transpose();  // phi_j - phi_new
  return diff.transpose() * k.asDiagonal() * m.weights / m.epsilon_star;
}

JacobianReport jacobian_report(const GHModel& m, const Eigen::MatrixXd& points, std::size_t workers) {
  if (m.input_dim() != m.target_dim()) throw DomainError("Jacobian determinant needs a square map");
  check_point_dim(m, points.cols());
  JacobianReport r;
  r.determinants.resize(static_cast<std::size_t>(points.rows()));
  parallel_for(static_cast<std::size_t>(points.rows()), workers, [&](std::size_t i) {
    const Eigen::VectorXd x = points.row(static_cast<Eigen::Index>(i)).transpose();
    r.determinants[i] = gh_gradient(m, x).transpose().determinant();
  });
  if (r.determinants.empty()) return r;
  const bool all_pos = std::all_of(r.determinants.begin(), r.determinants.end(), [](double d) { return d > 0.0; });
  const bool all_neg = std::all_of(r.determinants.begin(), r.determinants.end(), [](double d) { return d < 0.0; });
  r.sign_consistent = all_pos || all_neg;
  r.min_abs = std::numeric_limits<double>::infinity();
  for (double d : r.determinants) r.min_abs = std::min(r.min_abs, std::abs(d));
  return r;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index j = 0; j < a.cols(); ++j) row[static_cast<std::size_t>(j)] = a(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DomainError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) a(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return a;
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void write_gh_json(std::ostream& os, const GHModel& m) {
  nlohmann::json j;
  j["epsilon_star"] = m.epsilon_star;
  j["inputs"] = matrix_json(m.inputs);
  j["sigma"] = vec(m.sigma);
  j["psi"] = matrix_json(m.psi);
  j["coefficients"] = matrix_json(m.coefficients);
  j["output_scaling"] = {{"lo", vec(m.output_scaling.lo)},
                         {"span", vec(m.output_scaling.span)},
                         {"constant", m.output_scaling.constant}};
  j["warnings"] = m.warnings;
  os << j.dump() << '\n';
}

GHModel read_gh_json(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
    GHModel m;
    m.epsilon_star = j.at("epsilon_star").get<double>();
    m.inputs = json_matrix(j.at("inputs"));
    m.sigma = json_vector(j.at("sigma"));
    m.psi = json_matrix(j.at("psi"));
    m.coefficients = json_matrix(j.at("coefficients"));
    const auto& sc = j.at("output_scaling");
    m.output_scaling.lo = json_vector(sc.at("lo"));
    m.output_scaling.span = json_vector(sc.at("span"));
    m.output_scaling.constant = sc.at("constant").get<std::vector<bool>>();
    m.warnings = j.value("warnings", std::vector<std::string>{});
    if (m.psi.rows() != m.inputs.rows() || m.psi.cols() != m.sigma.size() ||
        m.coefficients.rows() != m.sigma.size() ||
        m.output_scaling.size() != static_cast<std::size_t>(m.coefficients.cols())) {
      throw DomainError("inconsistent geometric harmonics model");
    }
    m.weights = m.psi * m.sigma.cwiseInverse().asDiagonal() * m.coefficients;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed geometric harmonics model: ") + e.what());
  }
}

void write_jacobian_json(std::ostream& os, const JacobianReport& r) {
  nlohmann::json j;
  j["determinants"] = r.determinants;
  j["sign_consistent"] = r.sign_consistent;
  j["min_abs"] = r.min_abs;
  os << j.dump(2) << '\n';
}

}  // namespace sgid
