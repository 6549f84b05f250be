#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mdgp/basis.hpp"
#include "mdgp/error.hpp"
#include "mdgp/inference.hpp"
#include "mdgp/predict.hpp"
#include "mdgp/warnings.hpp"
#include "test_util.hpp"

using namespace mdgp;
using mdgp::testing::random_vector;

namespace {

CovariateSpace x_z_space() {
  return CovariateSpace({ContinuousDim{"x", -2.0, 2.0},
                         CategoricalDim{"z", {"a", "b", "c"}}});
}

Eigen::MatrixXd inputs(int N, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  Eigen::MatrixXd X(N, 2);
  for (int n = 0; n < N; ++n) {
    X(n, 0) = unif(rng);
    X(n, 1) = n % 3;
  }
  return X;
}

std::vector<Draw> random_draws(const KernelExpr &e, Eigen::Index M, int S,
                               std::mt19937_64 &rng) {
  std::lognormal_distribution<double> pos(0.0, 0.5);
  std::vector<Draw> out;
  for (int s = 0; s < S; ++s) {
    Draw d;
    d.xi = random_vector(M, rng);
    d.theta = HyperParams::unit(e);
    for (auto &a : d.theta.magnitude) a = pos(rng);
    for (auto &t : d.theta.lengthscale)
      for (auto &l : t) l = pos(rng);
    d.theta.obs.sigma = pos(rng);
    out.push_back(d);
  }
  return out;
}

}  // namespace

TEST_CASE("draws at training points equal the inference latent") {
  std::mt19937_64 rng(1);
  const auto e = parse_formula("y ~ gp(x) + zs(z) * gp(x)", x_z_space());
  const Eigen::MatrixXd X = inputs(20, rng);
  BasisConfig cfg;
  cfg.num_basis = 6;
  auto fm = std::make_shared<const FeatureMap>(build_feature_map(X, e, cfg));
  const ApproxPosterior post(fm, {random_vector(20, rng), {}},
                             Likelihood::Gaussian, PriorSpec{});
  const auto draws = random_draws(e, fm->cols(), 5, rng);
  const Eigen::MatrixXd f = draws_f_at(fm->basis(), X, draws);
  for (int s = 0; s < 5; ++s) {
    const Eigen::VectorXd latent = post.latent(post.pack(draws[static_cast<std::size_t>(s)]));
    CHECK((f.row(s).transpose() - latent).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("zero xi gives the zero function") {
  std::mt19937_64 rng(2);
  const auto e = parse_formula("y ~ gp(x) + zs(z) * gp(x)", x_z_space());
  const auto fm = build_feature_map(inputs(10, rng), e, BasisConfig{});
  auto draws = random_draws(e, fm.cols(), 1, rng);
  draws[0].xi.setZero();
  CHECK(draws_f_at(fm.basis(), inputs(7, rng), draws).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single point matches a scalar evaluation") {
  std::mt19937_64 rng(3);
  const auto space = CovariateSpace({ContinuousDim{"x", -2.0, 2.0}});
  const auto e = parse_formula("y ~ gp(x)", space);
  BasisConfig cfg;
  cfg.num_basis = 12;
  Eigen::MatrixXd X = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0);
  const auto fm = build_feature_map(X, e, cfg);
  const auto draws = random_draws(e, fm.cols(), 3, rng);
  Eigen::MatrixXd p(1, 1);
  p << 0.37;
  const Eigen::MatrixXd f = draws_f_at(fm.basis(), p, draws);
  const double L = fm.basis().boundary(0, 0);
  for (int s = 0; s < 3; ++s) {
    const auto &d = draws[static_cast<std::size_t>(s)];
    const double a = d.theta.magnitude[0], l = d.theta.lengthscale[0][0];
    double v = 0.0;
    for (int b = 1; b <= 12; ++b)
      v += a * std::sqrt(spectral_density_eq(std::sqrt(laplacian_eigenvalue(b, L)), l)) *
           laplacian_eigenfunction(b, L, 0.37) * d.xi(b - 1);
    CHECK(std::abs(f(s, 0) - v) < 1e-12);
  }
}

TEST_CASE("components add up to the total") {
  std::mt19937_64 rng(4);
  const auto e = parse_formula("y ~ gp(x) + zs(z) * gp(x) + cs(z: 1, 0.3)",
                               x_z_space());
  const auto fm = build_feature_map(inputs(15, rng), e, BasisConfig{});
  const auto draws = random_draws(e, fm.cols(), 10, rng);
  const Eigen::MatrixXd T = inputs(12, rng);
  const Eigen::MatrixXd total = draws_f_at(fm.basis(), T, draws);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(total.rows(), total.cols());
  for (std::size_t j = 0; j < 3; ++j) sum += draws_component_at(fm.basis(), T, j, draws);
  CHECK((sum - total).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(draws_component_at(fm.basis(), T, 3, draws), InvalidArgument);

  const auto e1 = parse_formula("y ~ gp(x)", x_z_space());
  const auto fm1 = build_feature_map(inputs(15, rng), e1, BasisConfig{});
  const auto d1 = random_draws(e1, fm1.cols(), 4, rng);
  CHECK(draws_component_at(fm1.basis(), T, 0, d1) == draws_f_at(fm1.basis(), T, d1));
}

TEST_CASE("unseen level and out-of-domain points") {
  std::mt19937_64 rng(5);
  const auto e = parse_formula("y ~ zs(z) * gp(x)", x_z_space());
  const auto fm = build_feature_map(inputs(15, rng), e, BasisConfig{});
  const auto draws = random_draws(e, fm.cols(), 2, rng);
  Eigen::MatrixXd bad(1, 2);
  bad << 0.0, 5.0;
  CHECK_THROWS_AS(draws_f_at(fm.basis(), bad, draws), DimensionError);
  Eigen::MatrixXd far(2, 2);
  far << 10.0, 0.0, 0.0, 1.0;
  WarningCapture capture;
  draws_f_at(fm.basis(), far, draws);
  CHECK(capture.messages().size() == 1);
}

TEST_CASE("Gaussian predictive draws") {
  std::mt19937_64 rng(6);
  const int S = 4000, P = 5;
  Eigen::MatrixXd f(S, P);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = 0.5 * normal(rng) + 1.0;
  std::vector<ObsParams> obs(S);
  for (auto &o : obs) o.sigma = 1e-12;
  const Eigen::MatrixXd tight = draws_predictive(Likelihood::Gaussian, f, obs, std::nullopt, 1);
  CHECK((tight - f).cwiseAbs().maxCoeff() < 1e-9);

  for (auto &o : obs) o.sigma = 0.8;
  const Eigen::MatrixXd y = draws_predictive(Likelihood::Gaussian, f, obs, std::nullopt, 2);
  for (int p = 0; p < P; ++p) {
    const auto var = [](const Eigen::VectorXd &v) {
      return (v.array() - v.mean()).square().sum() / (v.size() - 1.0);
    };
    CHECK(var(y.col(p)) >= var(f.col(p)));
    const Eigen::VectorXd noise = y.col(p) - f.col(p);
    const double mcse = std::sqrt(var(noise) / S);
    CHECK(std::abs(y.col(p).mean() - f.col(p).mean()) < 3.0 * mcse);
  }
  CHECK(draws_predictive(Likelihood::Gaussian, f, obs, std::nullopt, 9) ==
        draws_predictive(Likelihood::Gaussian, f, obs, std::nullopt, 9));
}

TEST_CASE("beta-binomial predictive needs trials") {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 2);
  std::vector<ObsParams> obs(3);
  CHECK_THROWS_AS(draws_predictive(Likelihood::BetaBinomial, f, obs, std::nullopt, 1),
                  InvalidArgument);
  const Eigen::MatrixXd y = draws_predictive(Likelihood::BetaBinomial, f, obs,
                                             std::vector<int>{10, 0}, 1);
  CHECK(y.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(y.col(0).maxCoeff() <= 10.0);
}

TEST_CASE("mlpd conventions") {
  const int S = 7, P = 4;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(P, -1.0, 1.0);
  Eigen::MatrixXd f(S, P);
  for (int s = 0; s < S; ++s) f.row(s) = y.transpose();
  const std::vector<ObsParams> obs(S);
  const ResponseData test{y, {}};
  CHECK(mlpd(Likelihood::Gaussian, test, f, obs) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));

  std::mt19937_64 rng(7);
  const Eigen::MatrixXd g = mdgp::testing::random_matrix(1, P, rng);
  double mean = 0.0;
  for (int p = 0; p < P; ++p)
    mean += loglik_point(Likelihood::Gaussian, {y(p), 0}, g(0, p), obs[0]);
  const std::vector<ObsParams> one(1);
  CHECK(mlpd(Likelihood::Gaussian, test, g, one) == doctest::Approx(mean / P));
  CHECK(mlpd(Likelihood::Gaussian, test, g, one, MlpdMode::LogMeanExp) ==
        doctest::Approx(mean / P));

  // Jensen: the mixture score is never below the mean log score.
  const Eigen::MatrixXd h = mdgp::testing::random_matrix(S, P, rng);
  CHECK(mlpd(Likelihood::Gaussian, test, h, obs, MlpdMode::LogMeanExp) >=
        mlpd(Likelihood::Gaussian, test, h, obs));
  CHECK_THROWS_AS(mlpd(Likelihood::Gaussian, test, h.leftCols(3), obs), DimensionError);
}

TEST_CASE("decode draws from sampler output") {
  const auto e = parse_formula("y ~ gp(x)", x_z_space());
  PosteriorDraws pd;
  pd.names = draw_names(e, 2, Likelihood::Gaussian);
  pd.values.resize(2, 5);
  pd.values << 0.1, 0.2, 1.5, 0.7, 0.3, -0.1, -0.2, 2.0, 0.9, 0.4;
  const auto draws = decode_draws(e, 2, Likelihood::Gaussian, pd);
  REQUIRE(draws.size() == 2);
  CHECK(draws[1].theta.magnitude[0] == 2.0);
  CHECK(draws[1].theta.lengthscale[0][0] == 0.9);
  CHECK(obs_params(draws)[0].sigma == 0.3);
}
