#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace mdgp {

// ---------------------------------------------------------------------------
// Covariate space
// ---------------------------------------------------------------------------

struct ContinuousDim {
  std::string name;
  double observed_min = -1.0;
  double observed_max = 1.0;
};

struct CategoricalDim {
  std::string name;
  std::vector<std::string> labels;

  std::size_t num_categories() const { return labels.size(); }
};

using DimSpec = std::variant<ContinuousDim, CategoricalDim>;

/// Ordered list of named input dimensions.
///
/// A point in the space is a row of doubles in dimension order. Categorical
/// coordinates hold the zero-based level index (0 .. C-1) as a double.
class CovariateSpace {
 public:
  CovariateSpace() = default;
  explicit CovariateSpace(std::vector<DimSpec> dims);

  std::size_t size() const { return dims_.size(); }
  const std::vector<DimSpec> &dims() const { return dims_; }
  const DimSpec &dim(std::size_t i) const { return dims_.at(i); }

  const std::string &name(std::size_t i) const;
  bool is_continuous(std::size_t i) const;
  bool is_categorical(std::size_t i) const { return !is_continuous(i); }
  std::size_t num_categories(std::size_t i) const;

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws FormulaError on an unknown name.
  std::size_t index_of(std::string_view name) const;

  /// Zero-based level for a label of categorical dimension `i`.
  std::optional<int> level_of(std::size_t i, std::string_view label) const;

  /// Checks that a point conforms (length, integral in-range levels).
  void validate_point(std::span<const double> x) const;

 private:
  std::vector<DimSpec> dims_;
};

/// Level index stored in a categorical coordinate.
int level_index(double coordinate);

// ---------------------------------------------------------------------------
// Base kernels
// ---------------------------------------------------------------------------

/// Exponentiated quadratic factor with unit magnitude; the lengthscale lives
/// in HyperParams.
struct EqKernel {
  std::size_t dim = 0;
};

/// 1 on the diagonal, -1/(C-1) elsewhere.
struct ZeroSumKernel {
  std::size_t dim = 0;
  std::size_t num_categories = 2;
};

/// variance on the diagonal, covariance elsewhere.
struct CompoundSymmetryKernel {
  std::size_t dim = 0;
  std::size_t num_categories = 2;
  double variance = 1.0;
  double covariance = 0.0;
};

/// 1 when neither level is masked, 0 otherwise. `masked` holds zero-based
/// levels.
struct MaskKernel {
  std::size_t dim = 0;
  std::size_t num_categories = 2;
  std::vector<int> masked;
};

/// User-supplied symmetric C x C matrix.
struct CustomKernel {
  std::size_t dim = 0;
  Eigen::MatrixXd matrix;
};

using CategoricalKernel =
    std::variant<ZeroSumKernel, CompoundSymmetryKernel, MaskKernel,
                 CustomKernel>;

/// Validated constructors; throw InvalidArgument on bad parameters.
CompoundSymmetryKernel make_compound_symmetry(std::size_t dim, std::size_t C,
                                              double variance,
                                              double covariance);
MaskKernel make_mask(std::size_t dim, std::size_t C, std::vector<int> masked);
CustomKernel make_custom(std::size_t dim, Eigen::MatrixXd matrix);

std::size_t kernel_dim(const CategoricalKernel &kernel);
std::size_t num_categories(const CategoricalKernel &kernel);

/// The C x C matrix with entry [v, w] = l(v, w).
Eigen::MatrixXd categorical_matrix(const CategoricalKernel &kernel);
double categorical_value(const CategoricalKernel &kernel, int v, int w);

/// Unit-magnitude EQ kernel value.
double eq_value(double x, double x_prime, double lengthscale);

// ---------------------------------------------------------------------------
// Sum-of-products expression
// ---------------------------------------------------------------------------

struct KernelTerm {
  std::vector<EqKernel> continuous;
  std::vector<CategoricalKernel> categorical;

  std::size_t num_factors() const {
    return continuous.size() + categorical.size();
  }
};

class KernelExpr {
 public:
  KernelExpr() = default;
  /// Validates the term structure against the space; throws FormulaError.
  KernelExpr(CovariateSpace space, std::vector<KernelTerm> terms,
             std::string response = "y");

  const CovariateSpace &space() const { return space_; }
  const std::vector<KernelTerm> &terms() const { return terms_; }
  const KernelTerm &term(std::size_t j) const { return terms_.at(j); }
  std::size_t num_terms() const { return terms_.size(); }
  const std::string &response() const { return response_; }

  /// Total number of continuous factors over all terms.
  std::size_t num_lengthscales() const;

 private:
  CovariateSpace space_;
  std::vector<KernelTerm> terms_;
  std::string response_ = "y";
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Observation-model parameters. Only the fields relevant to the chosen
/// likelihood are read.
struct ObsParams {
  double sigma = 1.0;      // Gaussian noise sd
  double gamma = 0.1;      // beta-binomial overdispersion, in (0, 1)
  double intercept = 0.0;  // beta-binomial intercept w0
};

struct HyperParams {
  std::vector<double> magnitude;                 // alpha_j, one per term
  std::vector<std::vector<double>> lengthscale;  // ell_{j,q}
  ObsParams obs;

  /// All magnitudes and lengthscales equal to one.
  static HyperParams unit(const KernelExpr &expr);

  /// Throws InvalidArgument on shape mismatch or non-positive values.
  void validate(const KernelExpr &expr) const;

  /// Kernel parameters packed term-major: alpha_j, ell_{j,1..Q_j}, ...
  std::vector<double> pack_kernel() const;
  static HyperParams unpack_kernel(const KernelExpr &expr,
                                   std::span<const double> packed);
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Value of term j: alpha_j^2 * prod EQ * prod categorical.
double eval_term(const KernelExpr &expr, std::size_t j,
                 const HyperParams &theta, std::span<const double> x,
                 std::span<const double> x_prime);

/// Sum over all terms.
double eval_kernel(const KernelExpr &expr, const HyperParams &theta,
                   std::span<const double> x, std::span<const double> x_prime);

// ---------------------------------------------------------------------------
// Formula syntax
// ---------------------------------------------------------------------------

/// Parses `y ~ term (+ term)*` where a term is a `*`-separated product of
///   gp(x)             EQ factor on continuous x
///   zs(z)             zero-sum factor
///   cs(z: var, cov)   compound symmetry factor
///   bin(z: a, b, ...) mask factor, listed labels are masked
///   cat(z)            custom matrix taken from `custom_matrices[z]`
KernelExpr parse_formula(
    std::string_view text, const CovariateSpace &space,
    const std::map<std::string, Eigen::MatrixXd> &custom_matrices = {});

/// Canonical text form; parse_formula(format_formula(e)) reproduces e.
std::string format_formula(const KernelExpr &expr);

}  // namespace mdgp
