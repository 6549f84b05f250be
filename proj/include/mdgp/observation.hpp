#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/kernel.hpp"

namespace mdgp {

enum class Likelihood { Gaussian, BetaBinomial };

Likelihood parse_likelihood(std::string_view name);
std::string likelihood_name(Likelihood likelihood);

/// One response. Gaussian: `value` is y and `trials` is ignored.
/// Beta-binomial: `value` is the success count, `trials` the number of trials.
struct Observation {
  double value = 0.0;
  int trials = 0;
};

/// Response vector of a data set; `trials` is empty for Gaussian data.
struct ResponseData {
  Eigen::VectorXd values;
  std::vector<int> trials;

  Eigen::Index size() const { return values.size(); }
  Observation at(Eigen::Index n) const {
    return {values(n), trials.empty() ? 0 : trials[static_cast<std::size_t>(n)]};
  }
};

/// Throws DataError for negative counts, non-integer counts or
/// successes > trials.
void validate_observation(Likelihood likelihood, const Observation &obs);
void validate_responses(Likelihood likelihood, const ResponseData &data);

/// Numerically stable 1 / (1 + exp(-x)).
double inv_logit(double x);

/// log p(y | f, theta_obs).
double loglik_point(Likelihood likelihood, const Observation &obs, double f,
                    const ObsParams &params);

/// d/df of loglik_point.
double dloglik_df(Likelihood likelihood, const Observation &obs, double f,
                  const ObsParams &params);

/// Derivatives of loglik_point with respect to the constrained observation
/// parameters.
struct ObsParamGradient {
  double sigma = 0.0;
  double gamma = 0.0;
  double intercept = 0.0;
};
ObsParamGradient dloglik_dparams(Likelihood likelihood, const Observation &obs,
                                 double f, const ObsParams &params);

/// Sum of loglik_point over the data set.
double loglik_total(Likelihood likelihood, const ResponseData &data,
                    const Eigen::VectorXd &f, const ObsParams &params);

/// One draw from p(y | f, theta_obs). Beta-binomial needs `trials`.
double sample_predictive(Likelihood likelihood, double f,
                         const ObsParams &params, std::optional<int> trials,
                         std::mt19937_64 &rng);

}  // namespace mdgp
