#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/kernel.hpp"

namespace mdgp {

/// phi_b(x) = sin(pi b (x + L) / (2L)) / sqrt(L), Dirichlet eigenfunction of
/// the 1-D Laplacian on [-L, L]. Evaluates the analytic extension outside.
double laplacian_eigenfunction(int b, double L, double x);

/// lambda_b = (pi b / (2L))^2.
double laplacian_eigenvalue(int b, double L);

/// Spectral density of the unit-magnitude EQ kernel,
/// ell * sqrt(2 pi) * exp(-ell^2 omega^2 / 2).
double spectral_density_eq(double omega, double lengthscale);

/// Orthogonal eigendecomposition of a categorical kernel matrix.
struct CategoricalEigen {
  Eigen::MatrixXd vectors;  // C x C, eigenvectors as columns
  Eigen::VectorXd values;   // C eigenvalues, column order of `vectors`
  std::vector<int> retained;  // columns kept in the feature expansion

  std::size_t effective_rank() const { return retained.size(); }
};

/// Relative threshold below which eigenvalues are dropped.
inline constexpr double kRankTolerance = 1e-10;

/// Closed form (ones vector + normalized Helmert contrasts) for ZS and CS,
/// symmetric eigensolver for masks and custom matrices. Throws
/// NotPositiveSemidefinite for a custom matrix with a clearly negative
/// eigenvalue.
CategoricalEigen decompose_categorical(const CategoricalKernel &kernel);

/// Columns 2..C of the orthonormal basis used for ZS/CS kernels. Each column
/// is orthogonal to the ones vector.
Eigen::MatrixXd normalized_helmert(std::size_t C);

struct BasisConfig {
  int num_basis = 16;    // B, per continuous factor
  double scale = 1.5;    // c, domain scaling factor
  std::size_t max_basis_total = 20000;

  void validate() const;
};

/// Which eigenfunctions / eigenvectors a feature column combines.
struct ColumnIndex {
  std::size_t term = 0;
  std::vector<int> basis;  // 1-based b per continuous factor
  std::vector<int> eigen;  // column of Theta per categorical factor
};

struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Parameter-free structure of the low-rank expansion: domain boundaries,
/// categorical eigenbases and the enumeration of feature columns. It can
/// evaluate the parameter-free features at any set of inputs and the
/// parameter-dependent column weights delta_m for any hyperparameters.
class BasisExpansion {
 public:
  BasisExpansion() = default;

  /// `boundaries[j][q]` is L for continuous factor q of term j.
  BasisExpansion(KernelExpr expr, BasisConfig config,
                 std::vector<std::vector<double>> boundaries);

  /// L = c * max |x| of each continuous covariate in `inputs`, which is the
  /// half-range for standardized data symmetric about 0.
  static BasisExpansion from_inputs(const KernelExpr &expr,
                                    const BasisConfig &config,
                                    const Eigen::MatrixXd &inputs);

  const KernelExpr &expr() const { return expr_; }
  const BasisConfig &config() const { return config_; }
  double boundary(std::size_t term, std::size_t q) const {
    return boundaries_.at(term).at(q);
  }
  const std::vector<std::vector<double>> &boundaries() const {
    return boundaries_;
  }
  const CategoricalEigen &eigen(std::size_t term, std::size_t r) const {
    return eigens_.at(term).at(r);
  }

  /// M, with dropped zero eigenvalues.
  std::size_t num_columns() const { return columns_.size(); }
  /// The count with every categorical factor contributing all C columns.
  std::size_t full_count() const { return full_count_; }

  const std::vector<ColumnIndex> &columns() const { return columns_; }
  const ColumnRange &slice(std::size_t term) const { return slices_.at(term); }
  const std::vector<ColumnRange> &slices() const { return slices_; }

  /// lambda_{b_q} for column m and continuous factor q.
  double column_eigenvalue(std::size_t m, std::size_t q) const {
    return column_lambda_[m][q];
  }
  /// Product of the retained categorical eigenvalues of column m.
  double column_categorical_weight(std::size_t m) const {
    return column_weight_[m];
  }

  /// Parameter-free feature matrix Psi-dagger (rows(inputs) x M).
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd &inputs) const;

  /// delta_m = alpha_j^2 prod_q S(sqrt(lambda_{b_q}); ell_{j,q}) prod_r d.
  Eigen::VectorXd deltas(const HyperParams &theta) const;

  /// Number of input rows with a standardized continuous coordinate outside
  /// [-L, L] of any factor using it. Emits a warning when nonzero.
  std::size_t check_domain(const Eigen::MatrixXd &inputs) const;

 private:
  void enumerate_columns();

  KernelExpr expr_;
  BasisConfig config_;
  std::vector<std::vector<double>> boundaries_;
  std::vector<std::vector<CategoricalEigen>> eigens_;
  std::vector<ColumnIndex> columns_;
  std::vector<ColumnRange> slices_;
  std::vector<std::vector<double>> column_lambda_;
  std::vector<double> column_weight_;
  std::size_t full_count_ = 0;
};

/// A basis expansion together with its features evaluated at a data set.
/// Psi = Psi-dagger * diag(sqrt(delta)).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(BasisExpansion basis, Eigen::MatrixXd evaluation)
      : basis_(std::move(basis)), evaluation_(std::move(evaluation)) {}

  const BasisExpansion &basis() const { return basis_; }
  const Eigen::MatrixXd &evaluation() const { return evaluation_; }
  Eigen::Index rows() const { return evaluation_.rows(); }
  Eigen::Index cols() const { return evaluation_.cols(); }

  Eigen::VectorXd deltas(const HyperParams &theta) const {
    return basis_.deltas(theta);
  }
  /// Psi for the given hyperparameters.
  Eigen::MatrixXd features(const HyperParams &theta) const;

 private:
  BasisExpansion basis_;
  Eigen::MatrixXd evaluation_;
};

/// Builds the expansion from (standardized) training inputs and evaluates
/// it there. Throws BasisTooLarge when M exceeds config.max_basis_total.
FeatureMap build_feature_map(const Eigen::MatrixXd &inputs,
                             const KernelExpr &expr,
                             const BasisConfig &config);

/// Psi-dagger diag(delta) Psi-dagger^T. For checks only; O(N^2 M).
Eigen::MatrixXd approx_kernel_matrix(const FeatureMap &features,
                                     const HyperParams &theta);

}  // namespace mdgp
