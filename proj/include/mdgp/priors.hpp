#pragma once

namespace mdgp {

struct StudentTPrior {
  double df = 20.0;
  double scale = 1.0;
};

struct LogNormalPrior {
  double mu = 0.0;
  double sigma = 1.0;
};

struct InverseGammaPrior {
  double shape = 1.0;
  double scale = 2.0;
};

struct NormalPrior {
  double mu = 0.0;
  double sd = 1.0;
};

/// Hyperparameter priors, all on the standardized data scale.
///   alpha_j  ~ half-Student-t(df, 0, scale)
///   ell      ~ Log-Normal(mu, sigma)
///   sigma^2  ~ Inverse-Gamma(shape, scale)
///   gamma    ~ Log-Normal(mu, sigma) restricted to (0, 1)
///   w0       ~ Normal(mu, sd)
struct PriorSpec {
  StudentTPrior magnitude{20.0, 1.0};
  LogNormalPrior lengthscale{0.0, 1.0};
  InverseGammaPrior noise_variance{1.0, 2.0};
  LogNormalPrior dispersion{1.0, 1.0};
  NormalPrior intercept{0.0, 0.5};

  /// Throws InvalidArgument when a scale is non-positive.
  void validate() const;
};

/// Log density of an unconstrained coordinate including the log-Jacobian of
/// its transform, plus the derivative with respect to that coordinate.
struct ScalarLogDensity {
  double value = 0.0;
  double derivative = 0.0;
};

/// u = log alpha.
ScalarLogDensity log_prior_log_magnitude(const StudentTPrior &prior, double u);
/// u = log ell.
ScalarLogDensity log_prior_log_lengthscale(const LogNormalPrior &prior,
                                           double u);
/// u = log sigma, prior placed on sigma^2.
ScalarLogDensity log_prior_log_sigma(const InverseGammaPrior &prior, double u);
/// u = logit gamma.
ScalarLogDensity log_prior_logit_dispersion(const LogNormalPrior &prior,
                                            double u);
/// u = w0 (identity).
ScalarLogDensity log_prior_intercept(const NormalPrior &prior, double u);

}  // namespace mdgp
