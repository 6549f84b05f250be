#include "mdgp/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mdgp/error.hpp"
#include "mdgp/warnings.hpp"

namespace mdgp {

double laplacian_eigenfunction(int b, double L, double x) {
  return std::sin(std::numbers::pi * b * (x + L) / (2.0 * L)) / std::sqrt(L);
}

double laplacian_eigenvalue(int b, double L) {
  const double w = std::numbers::pi * b / (2.0 * L);
  return w * w;
}

double spectral_density_eq(double omega, double lengthscale) {
  return lengthscale * std::sqrt(2.0 * std::numbers::pi) *
         std::exp(-0.5 * lengthscale * lengthscale * omega * omega);
}

// ---------------------------------------------------------------------------
// Categorical eigendecompositions
// ---------------------------------------------------------------------------

Eigen::MatrixXd normalized_helmert(std::size_t C) {
  const auto n = static_cast<Eigen::Index>(C);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n - 1);
  for (Eigen::Index k = 1; k < n; ++k) {
    // Contrast k: -1 on the first k levels, k on level k+1.
    const double norm = std::sqrt(static_cast<double>(k * (k + 1)));
    for (Eigen::Index i = 0; i < k; ++i) H(i, k - 1) = -1.0 / norm;
    H(k, k - 1) = static_cast<double>(k) / norm;
  }
  return H;
}

namespace {

CategoricalEigen compound_symmetry_eigen(std::size_t C, double variance,
                                         double covariance) {
  const auto n = static_cast<Eigen::Index>(C);
  CategoricalEigen out;
  out.vectors.resize(n, n);
  out.vectors.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(C)));
  out.vectors.rightCols(n - 1) = normalized_helmert(C);
  out.values.resize(n);
  out.values(0) = variance + static_cast<double>(C - 1) * covariance;
  out.values.tail(n - 1).setConstant(variance - covariance);
  return out;
}

CategoricalEigen numeric_eigen(const Eigen::MatrixXd &matrix) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
  if (solver.info() != Eigen::Success)
    throw NotPositiveSemidefinite("categorical eigensolver failed");
  const auto n = matrix.rows();
  CategoricalEigen out;
  out.vectors.resize(n, n);
  out.values.resize(n);
  // Descending eigenvalue order, sign fixed so the largest-magnitude entry
  // of each eigenvector is positive.
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index src = n - 1 - c;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.vectors.col(c) = v;
    out.values(c) = solver.eigenvalues()(src);
  }
  return out;
}

// Odometer increment over a mixed radix, last digit fastest.
bool advance(std::vector<std::size_t> &digit,
             const std::vector<std::size_t> &radix) {
  for (std::size_t k = digit.size(); k-- > 0;) {
    if (++digit[k] < radix[k]) return true;
    digit[k] = 0;
  }
  return false;
}

}  // namespace

CategoricalEigen decompose_categorical(const CategoricalKernel &kernel) {
  CategoricalEigen out;
  if (const auto *zs = std::get_if<ZeroSumKernel>(&kernel)) {
    const double C = static_cast<double>(zs->num_categories);
    out = compound_symmetry_eigen(zs->num_categories, 1.0, -1.0 / (C - 1.0));
    out.values(0) = 0.0;  // exact, avoids rounding residue
  } else if (const auto *cs = std::get_if<CompoundSymmetryKernel>(&kernel)) {
    out = compound_symmetry_eigen(cs->num_categories, cs->variance,
                                  cs->covariance);
  } else {
    out = numeric_eigen(categorical_matrix(kernel));
  }
  const double max_abs = out.values.cwiseAbs().maxCoeff();
  if (std::holds_alternative<CustomKernel>(kernel) &&
      out.values.minCoeff() < -1e-8 * max_abs)
    throw NotPositiveSemidefinite(
        "custom categorical kernel matrix is not positive semidefinite");
  for (Eigen::Index c = 0; c < out.values.size(); ++c)
    if (max_abs > 0.0 && out.values(c) > kRankTolerance * max_abs)
      out.retained.push_back(static_cast<int>(c));
  return out;
}

// ---------------------------------------------------------------------------
// BasisExpansion
// ---------------------------------------------------------------------------

void BasisConfig::validate() const {
  if (num_basis < 1) throw InvalidArgument("B must be >= 1");
  if (!(scale > 1.0)) throw InvalidArgument("c must be > 1");
  if (max_basis_total < 1) throw InvalidArgument("max_basis_total must be >= 1");
}

BasisExpansion::BasisExpansion(KernelExpr expr, BasisConfig config,
                               std::vector<std::vector<double>> boundaries)
    : expr_(std::move(expr)),
      config_(config),
      boundaries_(std::move(boundaries)) {
  config_.validate();
  if (boundaries_.size() != expr_.num_terms())
    throw InvalidArgument("boundaries do not match number of terms");
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    if (boundaries_[j].size() != t.continuous.size())
      throw InvalidArgument("boundaries do not match continuous factors");
    for (double L : boundaries_[j])
      if (!(L > 0.0) || !std::isfinite(L))
        throw InvalidArgument("domain boundary L must be positive");
    std::vector<CategoricalEigen> eig;
    for (const auto &c : t.categorical) eig.push_back(decompose_categorical(c));
    eigens_.push_back(std::move(eig));
  }
  enumerate_columns();
}

BasisExpansion BasisExpansion::from_inputs(const KernelExpr &expr,
                                           const BasisConfig &config,
                                           const Eigen::MatrixXd &inputs) {
  config.validate();
  if (inputs.cols() != static_cast<Eigen::Index>(expr.space().size()))
    throw DimensionError("input columns do not match covariate space");
  if (inputs.rows() < 1) throw DimensionError("no input rows");
  std::vector<std::vector<double>> boundaries;
  for (const auto &t : expr.terms()) {
    std::vector<double> L;
    for (const auto &e : t.continuous) {
      const auto col = inputs.col(static_cast<Eigen::Index>(e.dim));
      const double half_range = 0.5 * (col.maxCoeff() - col.minCoeff());
      if (!(half_range > 0.0))
        throw InvalidArgument("covariate '" + expr.space().name(e.dim) +
                              "' has zero range");
      const double reach = std::max(half_range, col.cwiseAbs().maxCoeff());
      L.push_back(config.scale * reach);
    }
    boundaries.push_back(std::move(L));
  }
  return BasisExpansion(expr, config, std::move(boundaries));
}

void BasisExpansion::enumerate_columns() {
  const int B = config_.num_basis;
  std::size_t total = 0;
  full_count_ = 0;
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    std::size_t count = 1, full = 1;
    for (std::size_t q = 0; q < t.continuous.size(); ++q) {
      count *= static_cast<std::size_t>(B);
      full *= static_cast<std::size_t>(B);
    }
    for (std::size_t r = 0; r < t.categorical.size(); ++r) {
      count *= eigens_[j][r].effective_rank();
      full *= num_categories(t.categorical[r]);
    }
    total += count;
    full_count_ += full;
  }
  if (total > config_.max_basis_total)
    throw BasisTooLarge("expansion needs " + std::to_string(total) +
                        " basis functions, above the cap of " +
                        std::to_string(config_.max_basis_total));

  columns_.clear();
  slices_.clear();
  column_lambda_.clear();
  column_weight_.clear();
  columns_.reserve(total);
  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    const std::size_t Q = t.continuous.size();
    const std::size_t R = t.categorical.size();
    std::vector<std::size_t> radix;
    for (std::size_t q = 0; q < Q; ++q) radix.push_back(B);
    for (std::size_t r = 0; r < R; ++r)
      radix.push_back(eigens_[j][r].effective_rank());

    ColumnRange range{columns_.size(), columns_.size()};
    const bool empty =
        std::any_of(radix.begin(), radix.end(), [](auto n) { return n == 0; });
    std::vector<std::size_t> digit(Q + R, 0);
    if (!empty) do {
      ColumnIndex col;
      col.term = j;
      std::vector<double> lambdas;
      double weight = 1.0;
      for (std::size_t q = 0; q < Q; ++q) {
        const int b = static_cast<int>(digit[q]) + 1;
        col.basis.push_back(b);
        lambdas.push_back(laplacian_eigenvalue(b, boundaries_[j][q]));
      }
      for (std::size_t r = 0; r < R; ++r) {
        const int c = eigens_[j][r].retained[digit[Q + r]];
        col.eigen.push_back(c);
        weight *= eigens_[j][r].values(c);
      }
      columns_.push_back(std::move(col));
      column_lambda_.push_back(std::move(lambdas));
      column_weight_.push_back(weight);
    } while (advance(digit, radix));
    range.end = columns_.size();
    slices_.push_back(range);
  }
}

Eigen::MatrixXd BasisExpansion::evaluate(const Eigen::MatrixXd &inputs) const {
  if (inputs.cols() != static_cast<Eigen::Index>(expr_.space().size()))
    throw DimensionError("input columns do not match covariate space");
  const Eigen::Index N = inputs.rows();
  const int B = config_.num_basis;
  Eigen::MatrixXd out(N, static_cast<Eigen::Index>(columns_.size()));

  for (std::size_t j = 0; j < expr_.num_terms(); ++j) {
    const auto &t = expr_.term(j);
    std::vector<Eigen::MatrixXd> phi;
    for (std::size_t q = 0; q < t.continuous.size(); ++q) {
      const auto x = inputs.col(static_cast<Eigen::Index>(t.continuous[q].dim));
      const double L = boundaries_[j][q];
      Eigen::MatrixXd P(N, B);
      for (int b = 1; b <= B; ++b)
        for (Eigen::Index n = 0; n < N; ++n)
          P(n, b - 1) = laplacian_eigenfunction(b, L, x(n));
      phi.push_back(std::move(P));
    }
    std::vector<Eigen::MatrixXd> theta_rows;
    for (std::size_t r = 0; r < t.categorical.size(); ++r) {
      const auto d = static_cast<Eigen::Index>(kernel_dim(t.categorical[r]));
      const auto &V = eigens_[j][r].vectors;
      Eigen::MatrixXd T(N, V.cols());
      for (Eigen::Index n = 0; n < N; ++n) {
        const int level = level_index(inputs(n, d));
        if (level < 0 || level >= V.rows())
          throw DimensionError("unseen level of '" +
                               expr_.space().name(static_cast<std::size_t>(d)) +
                               "'");
        T.row(n) = V.row(level);
      }
      theta_rows.push_back(std::move(T));
    }
    const auto &range = slices_[j];
    for (std::size_t m = range.begin; m < range.end; ++m) {
      const auto &col = columns_[m];
      auto dst = out.col(static_cast<Eigen::Index>(m));
      dst.setOnes();
      for (std::size_t q = 0; q < col.basis.size(); ++q)
        dst.array() *= phi[q].col(col.basis[q] - 1).array();
      for (std::size_t r = 0; r < col.eigen.size(); ++r)
        dst.array() *= theta_rows[r].col(col.eigen[r]).array();
    }
  }
  return out;
}

Eigen::VectorXd BasisExpansion::deltas(const HyperParams &theta) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(columns_.size()));
  for (std::size_t m = 0; m < columns_.size(); ++m) {
    const std::size_t j = columns_[m].term;
    const double alpha = theta.magnitude[j];
    double d = alpha * alpha * column_weight_[m];
    const auto &lambdas = column_lambda_[m];
    for (std::size_t q = 0; q < lambdas.size(); ++q)
      d *= spectral_density_eq(std::sqrt(lambdas[q]), theta.lengthscale[j][q]);
    out(static_cast<Eigen::Index>(m)) = d;
  }
  return out;
}

std::size_t BasisExpansion::check_domain(const Eigen::MatrixXd &inputs) const {
  std::size_t outside = 0;
  for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
    bool out = false;
    for (std::size_t j = 0; j < expr_.num_terms() && !out; ++j) {
      const auto &t = expr_.term(j);
      for (std::size_t q = 0; q < t.continuous.size(); ++q) {
        const double x =
            inputs(n, static_cast<Eigen::Index>(t.continuous[q].dim));
        if (std::abs(x) > boundaries_[j][q]) {
          out = true;
          break;
        }
      }
    }
    if (out) ++outside;
  }
  if (outside > 0)
    warn(std::to_string(outside) +
         " input row(s) lie outside the basis domain [-L, L]; the "
         "approximation degrades there");
  return outside;
}

// ---------------------------------------------------------------------------
// FeatureMap
// ---------------------------------------------------------------------------

Eigen::MatrixXd FeatureMap::features(const HyperParams &theta) const {
  const Eigen::VectorXd scale = deltas(theta).cwiseSqrt();
  return evaluation_ * scale.asDiagonal();
}

FeatureMap build_feature_map(const Eigen::MatrixXd &inputs,
                             const KernelExpr &expr,
                             const BasisConfig &config) {
  auto basis = BasisExpansion::from_inputs(expr, config, inputs);
  Eigen::MatrixXd evaluation = basis.evaluate(inputs);
  return FeatureMap(std::move(basis), std::move(evaluation));
}

Eigen::MatrixXd approx_kernel_matrix(const FeatureMap &features,
                                     const HyperParams &theta) {
  const Eigen::VectorXd d = features.deltas(theta);
  const auto &P = features.evaluation();
  return P * d.asDiagonal() * P.transpose();
}

}  // namespace mdgp
