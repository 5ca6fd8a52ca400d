#include "sgid/fim.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "sgid/errors.hpp"
#include "sgid/parallel.hpp"

namespace sgid {

IntegrationOptions sensitivity_integration() {
  IntegrationOptions o;
  o.rtol = 1e-9;
  o.atol = 1e-9;
  return o;
}

Eigen::VectorXd model_map(const IndependentParams& p, const LimitFlags& flags,
                          const ObservationGrid& grid, const IntegrationOptions& options,
                          const StateVector& ics) {
  grid.validate();
  const Trajectory traj = integrate(p, flags, ics, grid.t_end, options);
  return observe(traj, grid);
}

std::vector<std::string> active_names(const LimitFlags& flags) {
  std::vector<std::string> out;
  for (Param p : flags.active_params()) out.emplace_back(param_name(p));
  return out;
}

Eigen::VectorXd to_log_params(const IndependentParams& p, const LimitFlags& flags) {
  const std::vector<Param> active = flags.active_params();
  Eigen::VectorXd out(static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    const double v = p[active[i]];
    if (!(v > 0.0)) {
      throw DomainError("log coordinates need positive " + std::string(param_name(active[i])));
    }
    out[static_cast<Eigen::Index>(i)] = std::log(v);
  }
  return out;
}

IndependentParams from_log_params(const Eigen::VectorXd& log_params, const LimitFlags& flags,
                                  const IndependentParams& base) {
  const std::vector<Param> active = flags.active_params();
  if (static_cast<std::size_t>(log_params.size()) != active.size()) {
    throw DomainError("log-parameter vector does not match the active parameter count");
  }
  IndependentParams p = effective_params(base, flags);
  for (std::size_t i = 0; i < active.size(); ++i) {
    p[active[i]] = std::exp(log_params[static_cast<Eigen::Index>(i)]);
  }
  return p;
}

ParametricModel generator_model(const LimitFlags& flags, const ObservationGrid& grid,
                                const IntegrationOptions& options, const IndependentParams& base) {
  flags.validate();
  grid.validate();
  ParametricModel m;
  m.names = active_names(flags);
  m.evaluate = [flags, grid, options, base](const Eigen::VectorXd& log_params) {
    return model_map(from_log_params(log_params, flags, base), flags, grid, options);
  };
  return m;
}

SensitivityMatrix sensitivities(const ParametricModel& model, const Eigen::VectorXd& log_params,
                                double step, Coordinates coordinates, std::size_t workers) {
  if (!(step > 0.0)) throw DomainError("sensitivity step must be positive");
  const auto n = static_cast<Eigen::Index>(model.size());
  if (log_params.size() != n) throw DomainError("parameter vector size mismatch");

  std::vector<Eigen::VectorXd> columns(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t j) {
    Eigen::VectorXd plus = log_params, minus = log_params;
    plus[static_cast<Eigen::Index>(j)] += step;
    minus[static_cast<Eigen::Index>(j)] -= step;
    Eigen::VectorXd col = (model.evaluate(plus) - model.evaluate(minus)) / (2.0 * step);
    if (coordinates == Coordinates::bare_parameter) {
      col /= std::exp(log_params[static_cast<Eigen::Index>(j)]);
    }
    columns[j] = std::move(col);
  });

  SensitivityMatrix out;
  out.coordinates = coordinates;
  out.step = step;
  out.names = model.names;
  out.entries.resize(columns.front().size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd& col = columns[static_cast<std::size_t>(j)];
    if (!col.allFinite()) {
      throw NumericalError("non-finite model output at a perturbed parameter point");
    }
    out.entries.col(j) = col;
  }
  return out;
}

SensitivityMatrix sensitivities(const IndependentParams& p, const LimitFlags& flags,
                                const ObservationGrid& grid, double step,
                                const IntegrationOptions& options) {
  const ParametricModel m = generator_model(flags, grid, options, p);
  return sensitivities(m, to_log_params(p, flags), step);
}

FIMatrix fim(const SensitivityMatrix& jacobian) {
  if (!jacobian.entries.allFinite()) throw NumericalError("sensitivity matrix is not finite");
  FIMatrix out;
  out.entries = jacobian.entries.transpose() * jacobian.entries;
  // Symmetrize exactly; the product is symmetric up to rounding only.
  out.entries = 0.5 * (out.entries + out.entries.transpose()).eval();
  return out;
}

InfoSpectrum spectrum(const FIMatrix& info, const std::vector<std::string>& names) {
  const Eigen::MatrixXd& a = info.entries;
  if (a.rows() != a.cols()) throw DomainError("information matrix must be square");
  if (static_cast<std::size_t>(a.rows()) != names.size()) {
    throw DomainError("parameter names do not match the information matrix");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");

  InfoSpectrum s;
  s.names = names;
  s.eigenvalues = es.eigenvalues().reverse();
  s.eigenvectors = es.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < s.eigenvectors.cols(); ++k) {
    Eigen::Index at = 0;
    s.eigenvectors.col(k).cwiseAbs().maxCoeff(&at);
    if (s.eigenvectors(at, k) < 0.0) s.eigenvectors.col(k) *= -1.0;
  }
  s.participation = s.eigenvectors.array().square().matrix();
  return s;
}

std::size_t effective_dimension(const InfoSpectrum& s, double cutoff) {
  if (!(cutoff > 0.0)) throw DomainError("eigenvalue cutoff must be positive");
  return static_cast<std::size_t>((s.eigenvalues.array() > cutoff).count());
}

Eigen::VectorXd subspace_projection(const InfoSpectrum& s, std::size_t k) {
  const auto kk = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), s.eigenvectors.cols());
  return s.participation.leftCols(kk).rowwise().sum();
}

std::vector<std::string> identifiable_set(const InfoSpectrum& s, std::size_t k, double threshold) {
  const Eigen::VectorXd proj = subspace_projection(s, k);
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    if (proj[i] > threshold) out.push_back(s.names[static_cast<std::size_t>(i)]);
  }
  return out;
}

LogSpacing log_spacing(const InfoSpectrum& s) {
  std::vector<double> logs;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    if (s.eigenvalues[i] > 0.0) logs.push_back(std::log10(s.eigenvalues[i]));
  }
  LogSpacing out;
  if (logs.size() < 2) return out;
  out.span_decades = logs.front() - logs.back();
  std::vector<double> gaps;
  for (std::size_t i = 1; i < logs.size(); ++i) gaps.push_back(logs[i - 1] - logs[i]);
  out.max_gap = *std::max_element(gaps.begin(), gaps.end());
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  out.median_gap = m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
  return out;
}

NoisyData add_noise(const Eigen::VectorXd& y, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DomainError("noise level must be non-negative");
  NoisyData out;
  out.sigma = sigma;
  out.values = y;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index i = 0; i < y.size(); ++i) out.values[i] += normal(rng);
  return out;
}

void write_spectrum_json(std::ostream& os, const InfoSpectrum& s) {
  nlohmann::json j;
  j["names"] = s.names;
  j["eigenvalues"] = std::vector<double>(s.eigenvalues.data(),
                                         s.eigenvalues.data() + s.eigenvalues.size());
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.participation.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(s.participation.cols()));
    for (Eigen::Index k = 0; k < s.participation.cols(); ++k) {
      row[static_cast<std::size_t>(k)] = s.participation(i, k);
    }
    rows.push_back(row);
  }
  j["participation"] = rows;
  os << j.dump(2) << '\n';
}

void write_participation_csv(std::ostream& os, const InfoSpectrum& s) {
  os << std::setprecision(15);
  os << "parameter";
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) os << ",mode_" << (k + 1);
  os << "\neigenvalue";
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) os << ',' << s.eigenvalues[k];
  os << '\n';
  for (Eigen::Index i = 0; i < s.participation.rows(); ++i) {
    os << s.names[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < s.participation.cols(); ++k) os << ',' << s.participation(i, k);
    os << '\n';
  }
}

}  // namespace sgid
