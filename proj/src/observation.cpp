#include "mdgp/observation.hpp"

#include <cmath>

#include <boost/math/special_functions/digamma.hpp>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// NaN at the pole so that extreme states are rejected by the sampler
// instead of throwing.
double digamma(double x) {
  return x > 0.0 ? boost::math::digamma(x) : std::nan("");
}

struct BetaBinomialShape {
  double rho, rho_c, phi, a, b;  // rho_c = 1 - rho
};

BetaBinomialShape bb_shape(double f, const ObsParams &params) {
  if (!(params.gamma > 0.0 && params.gamma < 1.0))
    throw InvalidArgument("beta-binomial gamma must lie in (0, 1)");
  const double eta = f + params.intercept;
  const double rho = inv_logit(eta);
  const double rho_c = inv_logit(-eta);
  const double phi = 1.0 / params.gamma - 1.0;
  return {rho, rho_c, phi, rho * phi, rho_c * phi};
}

// d log p / da and d log p / db.
std::pair<double, double> bb_shape_gradient(const Observation &obs,
                                            const BetaBinomialShape &s) {
  const double k = obs.value;
  const double n = obs.trials;
  const double common = digamma(s.phi) - digamma(n + s.phi);
  return {digamma(k + s.a) - digamma(s.a) + common,
          digamma(n - k + s.b) - digamma(s.b) + common};
}

}  // namespace

Likelihood parse_likelihood(std::string_view name) {
  if (name == "gaussian") return Likelihood::Gaussian;
  if (name == "beta_binomial") return Likelihood::BetaBinomial;
  throw ConfigError("unknown likelihood '" + std::string(name) +
                    "' (expected gaussian or beta_binomial)");
}

std::string likelihood_name(Likelihood likelihood) {
  return likelihood == Likelihood::Gaussian ? "gaussian" : "beta_binomial";
}

void validate_observation(Likelihood likelihood, const Observation &obs) {
  if (!std::isfinite(obs.value)) throw DataError("non-finite response");
  if (likelihood == Likelihood::Gaussian) return;
  if (obs.value < 0 || obs.trials < 0)
    throw DataError("beta-binomial counts must be non-negative");
  if (std::round(obs.value) != obs.value)
    throw DataError("beta-binomial successes must be integers");
  if (obs.value > obs.trials)
    throw DataError("beta-binomial successes exceed trials");
}

void validate_responses(Likelihood likelihood, const ResponseData &data) {
  if (likelihood == Likelihood::BetaBinomial &&
      data.trials.size() != static_cast<std::size_t>(data.values.size()))
    throw DataError("beta-binomial data needs a trials count per row");
  for (Eigen::Index n = 0; n < data.size(); ++n)
    validate_observation(likelihood, data.at(n));
}

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double loglik_point(Likelihood likelihood, const Observation &obs, double f,
                    const ObsParams &params) {
  if (likelihood == Likelihood::Gaussian) {
    const double r = (obs.value - f) / params.sigma;
    return -kHalfLog2Pi - std::log(params.sigma) - 0.5 * r * r;
  }
  const auto s = bb_shape(f, params);
  const double k = obs.value;
  const double n = obs.trials;
  const double log_choose =
      std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return log_choose + lbeta(k + s.a, n - k + s.b) - lbeta(s.a, s.b);
}

double dloglik_df(Likelihood likelihood, const Observation &obs, double f,
                  const ObsParams &params) {
  if (likelihood == Likelihood::Gaussian)
    return (obs.value - f) / (params.sigma * params.sigma);
  const auto s = bb_shape(f, params);
  const auto [da, db] = bb_shape_gradient(obs, s);
  return s.rho * s.rho_c * s.phi * (da - db);
}

ObsParamGradient dloglik_dparams(Likelihood likelihood, const Observation &obs,
                                 double f, const ObsParams &params) {
  ObsParamGradient g;
  if (likelihood == Likelihood::Gaussian) {
    const double r2 = (obs.value - f) * (obs.value - f);
    const double s = params.sigma;
    g.sigma = -1.0 / s + r2 / (s * s * s);
    return g;
  }
  const auto s = bb_shape(f, params);
  const auto [da, db] = bb_shape_gradient(obs, s);
  g.intercept = s.rho * s.rho_c * s.phi * (da - db);
  g.gamma = -(s.rho * da + s.rho_c * db) / (params.gamma * params.gamma);
  return g;
}

double loglik_total(Likelihood likelihood, const ResponseData &data,
                    const Eigen::VectorXd &f, const ObsParams &params) {
  if (f.size() != data.size())
    throw DimensionError("latent vector and responses differ in length");
  double sum = 0.0;
  for (Eigen::Index n = 0; n < data.size(); ++n)
    sum += loglik_point(likelihood, data.at(n), f(n), params);
  return sum;
}

double sample_predictive(Likelihood likelihood, double f,
                         const ObsParams &params, std::optional<int> trials,
                         std::mt19937_64 &rng) {
  if (likelihood == Likelihood::Gaussian) {
    std::normal_distribution<double> noise(0.0, 1.0);
    return f + params.sigma * noise(rng);
  }
  if (!trials)
    throw InvalidArgument("beta-binomial prediction needs a trials count");
  if (*trials < 0) throw InvalidArgument("trials must be non-negative");
  const auto s = bb_shape(f, params);
  if (!(s.a > 0.0 && s.b > 0.0)) {
    std::binomial_distribution<int> binom(*trials, s.rho);
    return static_cast<double>(binom(rng));
  }
  std::gamma_distribution<double> ga(s.a, 1.0);
  std::gamma_distribution<double> gb(s.b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  double p = x / (x + y);
  if (!std::isfinite(p)) p = s.rho;
  std::binomial_distribution<int> binom(*trials, p);
  return static_cast<double>(binom(rng));
}

}  // namespace mdgp
