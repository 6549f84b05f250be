#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/kernel.hpp"
#include "mdgp/log_density.hpp"
#include "mdgp/priors.hpp"

namespace mdgp {

/// Cholesky factor of an SPD matrix. One jitter retry of
/// 1e-8 * mean(diag) is made on failure; `jitter` records what was added.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  double log_determinant() const;
  Eigen::Index size() const { return llt.matrixLLT().rows(); }
};

/// Throws SingularCovariance if the jittered retry also fails.
SpdFactor factorize_spd(const Eigen::MatrixXd &matrix);

/// log N(y | 0, cov).
double mvn_logpdf(const Eigen::VectorXd &y, const Eigen::MatrixXd &cov);

/// log N(y | 0, K + sigma^2 I).
double marginal_loglik_gaussian(const Eigen::MatrixXd &K, double sigma,
                                const Eigen::VectorXd &y);

/// p(f | theta, y) for the Gaussian observation model.
struct ExactPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  SpdFactor ky;  // factor of K + sigma^2 I
};

ExactPosterior exact_posterior_f(const Eigen::MatrixXd &K, double sigma,
                                 const Eigen::VectorXd &y);

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Test-point posterior of f given the factor of K_y:
/// mean = K* K_y^-1 y, cov = K** - K* K_y^-1 K*^T.
GaussianMoments exact_predict(const Eigen::MatrixXd &k_cross,
                              const Eigen::MatrixXd &k_test,
                              const SpdFactor &ky, const Eigen::VectorXd &y);

/// Same formulas with the kernel matrices of a single additive component.
GaussianMoments exact_predict_component(const Eigen::MatrixXd &k_cross_j,
                                        const Eigen::MatrixXd &k_test_j,
                                        const SpdFactor &ky,
                                        const Eigen::VectorXd &y);

/// Observation predictive: adds sigma^2 I to the covariance.
GaussianMoments add_noise(GaussianMoments moments, double sigma);

/// Dense kernel matrices k(X1_i, X2_k), total or for one term.
Eigen::MatrixXd kernel_matrix(const KernelExpr &expr, const HyperParams &theta,
                              const Eigen::MatrixXd &X1,
                              const Eigen::MatrixXd &X2);
Eigen::MatrixXd term_kernel_matrix(const KernelExpr &expr, std::size_t j,
                                   const HyperParams &theta,
                                   const Eigen::MatrixXd &X1,
                                   const Eigen::MatrixXd &X2);

/// Hyperparameter posterior of the exact Gaussian model with f marginalized
/// out, O(N^3) per evaluation. Coordinates: per term log alpha_j followed by
/// log ell_{j,q}, then log sigma.
class ExactMarginalPosterior : public LogDensity {
 public:
  ExactMarginalPosterior(KernelExpr expr, Eigen::MatrixXd inputs,
                         Eigen::VectorXd y, PriorSpec priors);

  std::size_t dimension() const override;
  double log_density(const Eigen::VectorXd &q,
                     Eigen::VectorXd &grad) const override;
  std::vector<std::string> output_names() const override;
  Eigen::VectorXd constrain(const Eigen::VectorXd &q) const override;

  HyperParams unpack(const Eigen::VectorXd &q) const;
  Eigen::VectorXd pack(const HyperParams &theta) const;

  const KernelExpr &expr() const { return expr_; }
  const Eigen::MatrixXd &inputs() const { return inputs_; }
  const Eigen::VectorXd &y() const { return y_; }

 private:
  KernelExpr expr_;
  Eigen::MatrixXd inputs_;
  Eigen::VectorXd y_;
  PriorSpec priors_;
  // Squared distances per continuous dimension (indexed by dim) and the
  // categorical factor product per term.
  std::vector<Eigen::MatrixXd> sq_dist_;
  std::vector<Eigen::MatrixXd> categorical_product_;
};

}  // namespace mdgp
