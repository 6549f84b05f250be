#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "mdgp/data.hpp"

namespace mdgp {

/// Longitudinal design with 9 individuals in 3 groups (id 1, 4, 7 in z = 1
/// and so on). Individuals 1-6 give n_train / 6 training rows each and 7-9
/// give n_test / 3 test rows each, ages uniform on [0, 10].
///   f = f1(age) + f2(age, z),  k1 = EQ(ell = 2),  k2 = ZS(z) EQ(ell = 1),
///   alpha_1 = alpha_2 = 1,     y = 100 + 10 (f + eps),  eps ~ N(0, 0.5^2).
/// f is drawn from the exact prior over all rows jointly. Columns: id, z,
/// age, y.
struct Experiment1 {
  Dataset train;
  Dataset test;
  Eigen::VectorXd f_train, f_test;    // truth, latent scale
  Eigen::VectorXd f1_train, f1_test;  // shared age component
  Eigen::VectorXd f2_train, f2_test;  // group component
};

/// Throws InvalidArgument when n_train is not a positive multiple of 6 or
/// n_test of 3.
Experiment1 simulate_experiment1(int n_train, int n_test, std::uint64_t seed);

/// Three-group beta-binomial data with a known latent:
///   f(x, z) = 0.8 sin(0.6 x) + g_z cos(0.4 x),  g = (0.5, -0.2, -0.3),
///   rho = inv-logit(f + w0), w0 = -0.3, gamma = 0.05,
///   trials uniform on 80..120, x uniform on [0, 10].
/// Columns: x, group, successes, trials.
struct BetaBinomialSim {
  Dataset data;
  Eigen::VectorXd f;    // latent without the intercept
  Eigen::VectorXd eta;  // f + w0
  double intercept = -0.3;
  double gamma = 0.05;
};

BetaBinomialSim simulate_beta_binomial(int per_group, std::uint64_t seed);

/// The deterministic latent of simulate_beta_binomial at (x, group level).
double beta_binomial_truth(double x, int group);

}  // namespace mdgp
