#include "sgid/dmaps.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sgid/errors.hpp"
#include "sgid/linalg.hpp"

namespace sgid {

Eigen::MatrixXd Scaling::apply(const Eigen::MatrixXd& raw) const {
  if (static_cast<std::size_t>(raw.cols()) != size()) throw DomainError("scaling column mismatch");
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    if (constant[static_cast<std::size_t>(c)]) {
      out.col(c).setConstant(0.5);
    } else {
      out.col(c) = (raw.col(c).array() - lo[c]) / span[c];
    }
  }
  return out;
}

Eigen::MatrixXd Scaling::invert(const Eigen::MatrixXd& scaled) const {
  if (static_cast<std::size_t>(scaled.cols()) != size()) throw DomainError("scaling column mismatch");
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    out.col(c) = (scaled.col(c).array() * span[c] + lo[c]).matrix();
  }
  return out;
}

Scaling Scaling::identity(std::size_t columns) {
  Scaling s;
  s.lo = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(columns));
  s.span = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(columns));
  s.constant.assign(columns, false);
  return s;
}

Dataset rescale01(const Eigen::MatrixXd& raw) {
  if (raw.rows() < 2) throw DomainError("rescaling needs at least two rows");
  if (!raw.allFinite()) throw DomainError("dataset contains non-finite entries");
  Dataset d;
  d.scaling.lo = raw.colwise().minCoeff().transpose();
  d.scaling.span = raw.colwise().maxCoeff().transpose() - d.scaling.lo;
  d.scaling.constant.resize(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    d.scaling.constant[static_cast<std::size_t>(c)] = !(d.scaling.span[c] > 0.0);
  }
  d.rows = d.scaling.apply(raw);
  return d;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw DomainError("point dimensions differ");
  Eigen::MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d = squared_distances(x, x);
  d.diagonal().setZero();
  return 0.5 * (d + d.transpose());
}

namespace {

double median_upper(const Eigen::MatrixXd& d) {
  const Eigen::Index n = d.rows();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) v.push_back(d(i, j));
  }
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  if (v.size() % 2) return v[m];
  const double hi = v[m];
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m)));
}

}  // namespace

double median_squared_distance(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw DomainError("median distance needs at least two points");
  return median_upper(squared_distances(x));
}

Bandwidth median_epsilon(const Eigen::MatrixXd& x, double multiplier) {
  if (!(multiplier > 0.0)) throw DomainError("bandwidth multiplier must be positive");
  Bandwidth b;
  b.median_sq = median_squared_distance(x);
  b.value = multiplier * b.median_sq;
  b.degenerate = !(b.median_sq > 0.0);
  return b;
}

Eigen::MatrixXd DMapsEmbedding::coordinates() const {
  Eigen::MatrixXd out(eigenvectors.rows(), static_cast<Eigen::Index>(nonharmonic.size()));
  for (std::size_t c = 0; c < nonharmonic.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = eigenvectors.col(static_cast<Eigen::Index>(nonharmonic[c]));
  }
  return out;
}

namespace {

// Symmetric conjugate S = D^{-1/2} A~ D^{-1/2} of the Markov matrix and the
// diagonal D^{-1/2}.
void normalized_kernel(const Eigen::MatrixXd& x, double epsilon, Eigen::MatrixXd& s,
                       Eigen::VectorXd& d_inv_sqrt) {
  if (!(epsilon > 0.0)) throw DomainError("kernel scale must be positive");
  if (x.rows() < 2) throw DomainError("diffusion maps need at least two points");
  if (!x.allFinite()) throw DomainError("dataset contains non-finite entries");
  s = (-squared_distances(x) / (2.0 * epsilon)).array().exp().matrix();
  const Eigen::VectorXd p = s.rowwise().sum();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] - s(i, i) < std::numeric_limits<double>::epsilon()) {
      throw NumericalError("kernel graph is disconnected at point " + std::to_string(i),
                           p[i] - s(i, i));
    }
  }
  const Eigen::VectorXd p_inv = p.cwiseInverse();
  s = p_inv.asDiagonal() * s * p_inv.asDiagonal();
  d_inv_sqrt = s.rowwise().sum().cwiseSqrt().cwiseInverse();
  s = d_inv_sqrt.asDiagonal() * s * d_inv_sqrt.asDiagonal();
  s = 0.5 * (s + s.transpose()).eval();
}

}  // namespace

Eigen::MatrixXd markov_matrix(const Eigen::MatrixXd& x, double epsilon) {
  Eigen::MatrixXd s;
  Eigen::VectorXd dis;
  normalized_kernel(x, epsilon, s, dis);
  // K = D^{-1/2} S D^{1/2}
  return dis.asDiagonal() * s * dis.cwiseInverse().asDiagonal();
}

DMapsEmbedding dmaps(const Eigen::MatrixXd& x, double epsilon, std::size_t k) {
  if (k == 0 || k >= static_cast<std::size_t>(x.rows())) {
    throw DomainError("eigenpair count must lie in [1, N)");
  }
  Eigen::MatrixXd s;
  Eigen::VectorXd dis;
  normalized_kernel(x, epsilon, s, dis);
  SymmetricEigen eig = top_eigenpairs(s, k);

  DMapsEmbedding out;
  out.epsilon = epsilon;
  out.eigenvalues = eig.values;
  out.eigenvectors = dis.asDiagonal() * eig.vectors;
  out.eigenvectors.colwise().normalize();
  fix_signs(out.eigenvectors);
  return out;
}

ResidualReport local_linear_residuals(const DMapsEmbedding& emb, double bandwidth_scale,
                                      std::size_t count) {
  const Eigen::MatrixXd& phi = emb.eigenvectors;
  const Eigen::Index n = phi.rows();
  const std::size_t available = emb.count() > 0 ? emb.count() - 1 : 0;
  if (available < 1) throw DomainError("residuals need at least one nontrivial eigenvector");
  if (!(bandwidth_scale > 0.0)) throw DomainError("regression bandwidth scale must be positive");
  if (count == 0 || count > available) count = available;

  ResidualReport rep;
  rep.residuals.resize(static_cast<Eigen::Index>(count));
  rep.residuals[0] = 1.0;
  rep.bandwidths.assign(count, 0.0);

  for (std::size_t t = 2; t <= count; ++t) {
    const auto p = static_cast<Eigen::Index>(t - 1);  // predictors phi_1 .. phi_{t-1}
    const Eigen::MatrixXd x = phi.middleCols(1, p);
    const Eigen::VectorXd y = phi.col(static_cast<Eigen::Index>(t));
    Eigen::MatrixXd w = squared_distances(x);
    const double eps = bandwidth_scale * median_upper(w);
    rep.bandwidths[t - 1] = eps;
    if (!(eps > 0.0)) throw NumericalError("predictor coordinates are degenerate");
    w = (-w / eps).array().exp().matrix();
    w.diagonal().setZero();

    // Weighted moments of z = (1, x) for every point through one product.
    const Eigen::Index q = p + 1;
    Eigen::MatrixXd z(n, q);
    z << Eigen::VectorXd::Ones(n), x;
    const Eigen::Index pairs = q * (q + 1) / 2;
    Eigen::MatrixXd c(n, pairs + q);
    Eigen::Index col = 0;
    for (Eigen::Index a = 0; a < q; ++a) {
      for (Eigen::Index b = a; b < q; ++b) c.col(col++) = z.col(a).cwiseProduct(z.col(b));
    }
    for (Eigen::Index a = 0; a < q; ++a) c.col(col++) = z.col(a).cwiseProduct(y);
    const Eigen::MatrixXd g = w * c;
    const Eigen::VectorXd w_sq = w.cwiseAbs2().rowwise().sum();

    Eigen::VectorXd fit(n);
    Eigen::MatrixXd m(q, q);
    Eigen::VectorXd rhs(q);
    for (Eigen::Index i = 0; i < n; ++i) {
      col = 0;
      for (Eigen::Index a = 0; a < q; ++a) {
        for (Eigen::Index b = a; b < q; ++b) m(a, b) = m(b, a) = g(i, col++);
      }
      for (Eigen::Index a = 0; a < q; ++a) rhs[a] = g(i, col++);
      const double total = m(0, 0);
      if (!(total > 0.0)) {
        fit[i] = 0.0;
        ++rep.ridge_fallbacks;
        continue;
      }
      const double n_eff = total * total / w_sq[i];
      Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
      bool ok = n_eff >= static_cast<double>(q) && ldlt.info() == Eigen::Success &&
                ldlt.isPositive() && ldlt.rcond() > 1e-12;
      if (!ok) {
        ++rep.ridge_fallbacks;
        Eigen::MatrixXd ridge = m;
        const double lam = 1e-8 * m.trace() / static_cast<double>(q);
        ridge.diagonal().tail(p).array() += lam;
        ldlt.compute(ridge);
      }
      const Eigen::VectorXd beta = ldlt.solve(rhs);
      fit[i] = z.row(i).dot(beta);
    }
    const double r = (y - fit).norm() / y.norm();
    rep.residuals[static_cast<Eigen::Index>(t - 1)] = std::clamp(r, 0.0, 1.0);
  }
  return rep;
}

namespace {

std::vector<std::size_t> order_desc(const Eigen::VectorXd& r) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(r.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return r[static_cast<Eigen::Index>(a)] > r[static_cast<Eigen::Index>(b)];
  });
  return idx;
}

std::vector<std::size_t> first_indices(const std::vector<std::size_t>& order, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(order[i] + 1);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Selection select_nonharmonic(const ResidualReport& rep, std::size_t target_dim) {
  const auto n = static_cast<std::size_t>(rep.residuals.size());
  if (target_dim == 0 || target_dim > n) throw DomainError("target dimension out of range");
  Selection s;
  s.indices = first_indices(order_desc(rep.residuals), target_dim);
  return s;
}

Selection select_by_gap(const ResidualReport& rep, double ambiguity_ratio) {
  const auto n = static_cast<std::size_t>(rep.residuals.size());
  Selection s;
  if (n < 2) {
    s.indices = first_indices(order_desc(rep.residuals), n);
    return s;
  }
  const std::vector<std::size_t> order = order_desc(rep.residuals);
  const double tiny = std::numeric_limits<double>::min();
  std::vector<double> ratios(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = rep.residuals[static_cast<Eigen::Index>(order[i])];
    const double b = rep.residuals[static_cast<Eigen::Index>(order[i + 1])];
    ratios[i] = a / std::max(b, tiny);
  }
  std::size_t best = 0, second = n;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    if (ratios[i] > ratios[best]) best = i;
  }
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (i != best && (second == n || ratios[i] > ratios[second])) second = i;
  }
  s.indices = first_indices(order, best + 1);
  s.gap_ratio = ratios[best];
  if (s.gap_ratio < ambiguity_ratio) {
    s.ambiguous = true;
    if (second < n) s.alternative = first_indices(order, second + 1);
    std::ostringstream msg;
    msg << "largest residual gap ratio " << s.gap_ratio << " is below " << ambiguity_ratio;
    s.warnings.push_back(msg.str());
  }
  return s;
}

void write_embedding_csv(std::ostream& os, const DMapsEmbedding& emb) {
  const Eigen::Index k = emb.eigenvectors.cols();
  os << "sample_id";
  for (Eigen::Index c = 1; c < k; ++c) os << ",phi_" << c;
  os << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < emb.eigenvectors.rows(); ++r) {
    os << r;
    for (Eigen::Index c = 1; c < k; ++c) os << ',' << emb.eigenvectors(r, c);
    os << '\n';
  }
}

void write_residuals_json(std::ostream& os, const ResidualReport& rep, const Selection& sel) {
  nlohmann::json j;
  j["residuals"] = std::vector<double>(rep.residuals.data(), rep.residuals.data() + rep.residuals.size());
  j["bandwidths"] = rep.bandwidths;
  j["ridge_fallbacks"] = rep.ridge_fallbacks;
  j["selected"] = sel.indices;
  j["gap_ratio"] = sel.gap_ratio;
  j["ambiguous"] = sel.ambiguous;
  j["alternative"] = sel.alternative;
  j["warnings"] = sel.warnings;
  os << j.dump(2) << '\n';
}

}  // namespace sgid
