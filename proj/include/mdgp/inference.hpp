#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/basis.hpp"
#include "mdgp/log_density.hpp"
#include "mdgp/observation.hpp"
#include "mdgp/priors.hpp"

namespace mdgp {

/// One posterior draw on the constrained scale.
struct Draw {
  Eigen::VectorXd xi;
  HyperParams theta;
};

/// Names of the constrained outputs: xi[m], alpha[j], ell[j,q], then sigma
/// (Gaussian) or gamma, w0 (beta-binomial).
std::vector<std::string> draw_names(const KernelExpr &expr, std::size_t M,
                                    Likelihood likelihood);

/// Splits one row laid out as in draw_names.
Draw decode_draw(const KernelExpr &expr, std::size_t M, Likelihood likelihood,
                 const Eigen::Ref<const Eigen::VectorXd> &row);
Eigen::VectorXd encode_draw(const Draw &draw, Likelihood likelihood);

/// Joint posterior of (xi, theta) for the low-rank model,
///   f = Psi-dagger diag(sqrt(delta(theta))) xi,  xi ~ N(0, I).
/// Unconstrained layout: xi (M), then per term log alpha_j, log ell_{j,q},
/// then log sigma, or logit gamma and w0. With `fixed` set only xi is sampled.
/// One evaluation costs two N x M matrix-vector products.
class ApproxPosterior : public LogDensity {
 public:
  ApproxPosterior(std::shared_ptr<const FeatureMap> features,
                  ResponseData data, Likelihood likelihood, PriorSpec priors,
                  std::optional<HyperParams> fixed = std::nullopt);

  std::size_t dimension() const override;
  double log_density(const Eigen::VectorXd &q,
                     Eigen::VectorXd &grad) const override;
  std::vector<std::string> output_names() const override;
  Eigen::VectorXd constrain(const Eigen::VectorXd &q) const override;

  std::size_t num_features() const;
  std::size_t num_theta() const;
  bool fixed_theta() const { return fixed_.has_value(); }

  Draw unpack(const Eigen::VectorXd &q) const;
  Eigen::VectorXd pack(const Draw &draw) const;

  /// Latent values Psi xi at the training inputs.
  Eigen::VectorXd latent(const Eigen::VectorXd &q) const;

  const FeatureMap &features() const { return *features_; }
  Likelihood likelihood() const { return likelihood_; }

 private:
  HyperParams theta_from(const Eigen::VectorXd &q) const;

  std::shared_ptr<const FeatureMap> features_;
  ResponseData data_;
  Likelihood likelihood_;
  PriorSpec priors_;
  std::optional<HyperParams> fixed_;
};

/// log N(y | 0, Psi Psi^T + sigma^2 I) in O(N M^2) via
/// Z = sigma^2 I_M + Psi^T Psi. Throws SingularCovariance if Z fails to
/// factor.
double woodbury_loglik(const Eigen::MatrixXd &psi, double sigma,
                       const Eigen::VectorXd &y);

double marginalized_loglik_woodbury(const FeatureMap &features,
                                    const HyperParams &theta,
                                    const Eigen::VectorXd &y);

/// Gaussian model with xi integrated out. Coordinates: per term log alpha_j,
/// log ell_{j,q}, then log sigma. After setup each evaluation is O(M^3),
/// independent of N.
class MarginalizedApproxPosterior : public LogDensity {
 public:
  MarginalizedApproxPosterior(std::shared_ptr<const FeatureMap> features,
                              Eigen::VectorXd y, PriorSpec priors);

  std::size_t dimension() const override;
  double log_density(const Eigen::VectorXd &q,
                     Eigen::VectorXd &grad) const override;
  std::vector<std::string> output_names() const override;
  Eigen::VectorXd constrain(const Eigen::VectorXd &q) const override;

  HyperParams unpack(const Eigen::VectorXd &q) const;
  Eigen::VectorXd pack(const HyperParams &theta) const;

  /// One draw of xi from N(Z^-1 Psi^T y, sigma^2 Z^-1).
  Eigen::VectorXd draw_xi(const HyperParams &theta,
                          std::mt19937_64 &rng) const;

  const FeatureMap &features() const { return *features_; }

 private:
  std::shared_ptr<const FeatureMap> features_;
  Eigen::VectorXd y_;
  PriorSpec priors_;
  Eigen::MatrixXd gram_;    // Psi-dagger^T Psi-dagger
  Eigen::VectorXd proj_y_;  // Psi-dagger^T y
  double yty_ = 0.0;
};

}  // namespace mdgp
