#include "mdgp/priors.hpp"

#include <cmath>
#include <numbers>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void PriorSpec::validate() const {
  if (!(magnitude.df > 0) || !(magnitude.scale > 0))
    throw InvalidArgument("magnitude prior needs df > 0 and scale > 0");
  if (!(lengthscale.sigma > 0))
    throw InvalidArgument("lengthscale prior needs sigma > 0");
  if (!(noise_variance.shape > 0) || !(noise_variance.scale > 0))
    throw InvalidArgument("noise variance prior needs shape, scale > 0");
  if (!(dispersion.sigma > 0))
    throw InvalidArgument("dispersion prior needs sigma > 0");
  if (!(intercept.sd > 0))
    throw InvalidArgument("intercept prior needs sd > 0");
}

ScalarLogDensity log_prior_log_magnitude(const StudentTPrior &prior,
                                         double u) {
  const double nu = prior.df;
  const double alpha = std::exp(u);
  const double t = alpha * alpha / (prior.scale * prior.scale * nu);
  const double log_norm = std::log(2.0) + std::lgamma(0.5 * (nu + 1.0)) -
                          std::lgamma(0.5 * nu) -
                          0.5 * std::log(nu * std::numbers::pi) -
                          std::log(prior.scale);
  ScalarLogDensity out;
  out.value = log_norm - 0.5 * (nu + 1.0) * std::log1p(t) + u;
  out.derivative = -(nu + 1.0) * t / (1.0 + t) + 1.0;
  return out;
}

ScalarLogDensity log_prior_log_lengthscale(const LogNormalPrior &prior,
                                           double u) {
  const double z = (u - prior.mu) / prior.sigma;
  // -log(ell) from the density cancels with the log-Jacobian +u.
  return {-std::log(prior.sigma) - kHalfLog2Pi - 0.5 * z * z,
          -z / prior.sigma};
}

ScalarLogDensity log_prior_log_sigma(const InverseGammaPrior &prior,
                                     double u) {
  const double a = prior.shape;
  const double b = prior.scale;
  const double inv_var = std::exp(-2.0 * u);
  ScalarLogDensity out;
  out.value = a * std::log(b) - std::lgamma(a) - (a + 1.0) * 2.0 * u -
              b * inv_var + std::log(2.0) + 2.0 * u;
  out.derivative = -2.0 * a + 2.0 * b * inv_var;
  return out;
}

ScalarLogDensity log_prior_logit_dispersion(const LogNormalPrior &prior,
                                            double u) {
  const double log_gamma = -softplus(-u);
  const double log_one_minus = -softplus(u);
  const double gamma = std::exp(log_gamma);
  const double z = (log_gamma - prior.mu) / prior.sigma;
  ScalarLogDensity out;
  // -log(gamma) from the density cancels with log(gamma) in the Jacobian.
  out.value = -std::log(prior.sigma) - kHalfLog2Pi - 0.5 * z * z +
              log_one_minus;
  out.derivative = -z / prior.sigma * (1.0 - gamma) - gamma;
  return out;
}

ScalarLogDensity log_prior_intercept(const NormalPrior &prior, double u) {
  const double z = (u - prior.mu) / prior.sd;
  return {-std::log(prior.sd) - kHalfLog2Pi - 0.5 * z * z, -z / prior.sd};
}

}  // namespace mdgp
