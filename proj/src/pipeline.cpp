#include "sgid/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "sgid/errors.hpp"
#include "sgid/parallel.hpp"

namespace sgid {

void EnsembleSpec::validate() const {
  if (n_samples < 2) throw DomainError("an ensemble needs at least two samples");
  if (!(perturbation >= 0.0 && perturbation < 1.0)) throw DomainError("perturbation must lie in [0, 1)");
  grid.validate();
  flags.validate();
}

Eigen::MatrixXd sample_ensemble(const EnsembleSpec& spec, const IndependentParams& base) {
  spec.validate();
  base.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(1.0 - spec.perturbation, 1.0 + spec.perturbation);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.n_samples), static_cast<Eigen::Index>(kNumParams));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Param q : all_params()) out(i, static_cast<Eigen::Index>(q)) = base[q] * u(rng);
  }
  return out;
}

IndependentParams params_from_row(const Eigen::MatrixXd& params, Eigen::Index row) {
  if (params.cols() != static_cast<Eigen::Index>(kNumParams)) {
    throw DomainError("parameter matrix needs one column per independent parameter");
  }
  IndependentParams p;
  for (Param q : all_params()) p[q] = params(row, static_cast<Eigen::Index>(q));
  p.validate();
  return p;
}

std::vector<std::string> param_names() {
  std::vector<std::string> out;
  for (Param q : all_params()) out.emplace_back(param_name(q));
  return out;
}

EnsembleOutputs run_ensemble(const Eigen::MatrixXd& params, const ObservationGrid& grid,
                             const LimitFlags& flags, std::size_t workers,
                             const IntegrationOptions& options) {
  grid.validate();
  flags.validate();
  const auto n = static_cast<std::size_t>(params.rows());
  std::vector<Eigen::VectorXd> ys(n);
  std::vector<std::string> errors(n);
  parallel_for(n, workers, [&](std::size_t i) {
    try {
      ys[i] = model_map(params_from_row(params, static_cast<Eigen::Index>(i)), flags, grid, options);
      if (!ys[i].allFinite()) throw NumericalError("non-finite model output");
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (errors[i].empty()) errors[i] = "unknown failure";
      ys[i].resize(0);
    }
  });

  EnsembleOutputs out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) out.failures.push_back({i, errors[i]});
  }
  if (static_cast<double>(out.failures.size()) > 0.01 * static_cast<double>(n)) {
    throw NumericalError(std::to_string(out.failures.size()) + " of " + std::to_string(n) +
                             " ensemble members failed; first: " + out.failures.front().message,
                         static_cast<double>(out.failures.size()));
  }
  const auto m = static_cast<Eigen::Index>(grid.size());
  out.outputs.resize(static_cast<Eigen::Index>(n - out.failures.size()), m);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) continue;
    out.outputs.row(r++) = ys[i].transpose();
    out.rows.push_back(i);
  }
  for (const auto& f : out.failures) {
    out.warnings.push_back("member " + std::to_string(f.row) + " dropped: " + f.message);
  }
  return out;
}

Split train_test_split(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
  if (n < 2) throw DomainError("cannot split fewer than two rows");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto ntrain = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  ntrain = std::clamp<std::size_t>(ntrain, 1, n - 1);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntrain));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(ntrain), idx.end());
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& a, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(a.rows())) throw DomainError("row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::MatrixXd take_cols(const Eigen::MatrixXd& a, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] >= static_cast<std::size_t>(a.cols())) throw DomainError("column index out of range");
    out.col(static_cast<Eigen::Index>(i)) = a.col(static_cast<Eigen::Index>(cols[i]));
  }
  return out;
}

Eigen::VectorXd mean_absolute_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols() || truth.rows() == 0) {
    throw DomainError("prediction and truth shapes differ");
  }
  return (predicted - truth).cwiseAbs().colwise().mean().transpose();
}

std::vector<std::string> lowest_error_set(const std::vector<std::string>& names,
                                          const Eigen::VectorXd& errors, std::size_t k) {
  if (names.size() != static_cast<std::size_t>(errors.size())) throw DomainError("one error per name expected");
  k = std::min(k, names.size());
  std::vector<std::size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return errors[static_cast<Eigen::Index>(a)] < errors[static_cast<Eigen::Index>(b)];
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(names[i]);
  return out;
}

double gh_epsilon(const Eigen::MatrixXd& inputs, const GhTrackOptions& options) {
  const Bandwidth b = median_epsilon(inputs, 1.0);
  if (b.degenerate) throw DomainError("all GH training inputs coincide");
  const double base = options.squared_median ? b.median_sq : std::sqrt(b.median_sq);
  return options.epsilon_multiplier * base;
}

namespace {

Scaling subset(const Scaling& s, const std::vector<std::size_t>& cols) {
  Scaling out;
  out.lo.resize(static_cast<Eigen::Index>(cols.size()));
  out.span.resize(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.lo[static_cast<Eigen::Index>(i)] = s.lo[static_cast<Eigen::Index>(cols[i])];
    out.span[static_cast<Eigen::Index>(i)] = s.span[static_cast<Eigen::Index>(cols[i])];
    out.constant.push_back(s.constant[cols[i]]);
  }
  return out;
}

}  // namespace

GhTrackResult gh_track(const Eigen::MatrixXd& coordinates, const Eigen::MatrixXd& params,
                       const std::vector<std::string>& names, const GhTrackOptions& options,
                       std::size_t workers) {
  if (coordinates.rows() != params.rows()) throw DomainError("coordinates and parameters differ in row count");
  if (names.size() != static_cast<std::size_t>(params.cols())) throw DomainError("one name per parameter column");
  const auto d = static_cast<std::size_t>(coordinates.cols());
  if (d == 0 || d > names.size()) throw DomainError("coordinate count must lie in [1, parameter count]");

  GhTrackResult r;
  r.names = names;
  r.coords = rescale01(coordinates);
  r.params = rescale01(params);
  r.split = train_test_split(static_cast<std::size_t>(coordinates.rows()), options.train_fraction,
                             options.split_seed);

  const Eigen::MatrixXd xtr = take_rows(r.coords.rows, r.split.train);
  const Eigen::MatrixXd xte = take_rows(r.coords.rows, r.split.test);
  const Eigen::MatrixXd ptr = take_rows(r.params.rows, r.split.train);
  const Eigen::MatrixXd pte = take_rows(r.params.rows, r.split.test);

  r.all_params = gh_fit(xtr, ptr, gh_epsilon(xtr, options), options.gh);
  r.all_params.output_scaling = r.params.scaling;
  r.mae = mean_absolute_error(gh_predict(r.all_params, xte, workers).values, pte);
  r.identifiable = lowest_error_set(names, r.mae, d);
  for (const auto& n : r.identifiable) {
    r.identifiable_cols.push_back(static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin()));
  }

  const Eigen::MatrixXd sub_tr = take_cols(ptr, r.identifiable_cols);
  r.forward = gh_fit(xtr, sub_tr, r.all_params.epsilon_star, options.gh);
  r.forward.output_scaling = subset(r.params.scaling, r.identifiable_cols);
  r.inverse = gh_fit(sub_tr, xtr, gh_epsilon(sub_tr, options), options.gh);
  r.inverse.output_scaling = r.coords.scaling;
  return r;
}

ComparisonReport compare_tracks(const InfoSpectrum& spectrum, double cutoff, double threshold,
                                std::size_t dmaps_dim, const std::vector<std::string>& names,
                                const Eigen::VectorXd& mae) {
  ComparisonReport r;
  r.fim_effective_dim = effective_dimension(spectrum, cutoff);
  r.dmaps_dim = dmaps_dim;
  r.fim_identifiable_set = identifiable_set(spectrum, r.fim_effective_dim, threshold);
  r.gh_identifiable_set = lowest_error_set(names, mae, dmaps_dim);
  const std::set<std::string> a(r.fim_identifiable_set.begin(), r.fim_identifiable_set.end());
  const std::set<std::string> b(r.gh_identifiable_set.begin(), r.gh_identifiable_set.end());
  r.agreement = r.fim_effective_dim == r.dmaps_dim && a == b;
  return r;
}

ReducedComparison compare_reduced(const IndependentParams& p, const IntegrationOptions& options,
                                  double t_start, double t_end, double dt) {
  if (!(t_start >= options.t_start && t_end > t_start && dt > 0.0)) throw DomainError("bad comparison window");
  const Trajectory full = integrate(p, LimitFlags::none(), StateVector::initial(), t_end, options);
  IntegrationOptions ro = options;
  ro.t_start = t_start;
  const LimitFlags all = LimitFlags::chain_prefix(limit_chain().size());
  const Trajectory red = integrate(effective_params(p, all), all, full.at(t_start), t_end, ro);

  ReducedComparison c;
  const auto steps = static_cast<std::size_t>(std::floor((t_end - t_start) / dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = std::min(t_start + static_cast<double>(k) * dt, t_end);
    c.times.push_back(t);
    c.full.push_back(full.at(t));
    c.reduced.push_back(red.at(t));
  }
  for (std::size_t s = 0; s < kNumStates; ++s) {
    double num = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      const double a = c.full[k][static_cast<State>(s)], b = c.reduced[k][static_cast<State>(s)];
      num = std::max(num, std::abs(a - b));
      scale = std::max(scale, std::abs(a));
    }
    c.max_rel_error[s] = scale > 0.0 ? num / scale : num;
  }
  return c;
}

void write_reduced_csv(std::ostream& os, const ReducedComparison& c) {
  os << "t";
  for (const char* tag : {"full_", "reduced_"}) {
    for (std::size_t s = 0; s < kNumStates; ++s) os << ',' << tag << state_name(static_cast<State>(s));
  }
  os << '\n' << std::setprecision(15);
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    os << c.times[k];
    for (std::size_t s = 0; s < kNumStates; ++s) os << ',' << c.full[k][static_cast<State>(s)];
    for (std::size_t s = 0; s < kNumStates; ++s) os << ',' << c.reduced[k][static_cast<State>(s)];
    os << '\n';
  }
}

void write_comparison_json(std::ostream& os, const ComparisonReport& r) {
  nlohmann::json j;
  j["fim_effective_dim"] = r.fim_effective_dim;
  j["dmaps_dim"] = r.dmaps_dim;
  j["fim_identifiable_set"] = r.fim_identifiable_set;
  j["gh_identifiable_set"] = r.gh_identifiable_set;
  j["agreement"] = r.agreement;
  os << j.dump(2) << '\n';
}

void write_matrix_csv(std::ostream& os, const std::vector<std::string>& header, const Eigen::MatrixXd& a,
                      bool ids) {
  if (header.size() != static_cast<std::size_t>(a.cols())) throw DomainError("one header per column expected");
  if (ids) os << "sample_id" << (header.empty() ? "" : ",");
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (ids) os << r << (a.cols() ? "," : "");
    for (Eigen::Index c = 0; c < a.cols(); ++c) os << (c ? "," : "") << a(r, c);
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& is, std::vector<std::string>* header, bool drop_first) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(is, line)) throw DomainError("CSV input is empty");
  std::vector<std::string> head = split(line);
  if (drop_first && !head.empty()) head.erase(head.begin());
  const std::size_t cols = head.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split(line);
    if (drop_first && !cells.empty()) cells.erase(cells.begin());
    if (cells.size() != cols) {
      throw DomainError("CSV row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(cols));
    }
    for (const auto& c : cells) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != c.size()) throw DomainError("non-numeric CSV field '" + c + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (header) *header = head;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
    }
  }
  return out;
}

}  // namespace sgid
