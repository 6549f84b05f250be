#include <cmath>
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "mdgp/diagnostics.hpp"
#include "mdgp/error.hpp"
#include "mdgp/nuts.hpp"

using namespace mdgp;

namespace {

/// Zero-mean Gaussian with the given covariance.
class GaussianTarget : public LogDensity {
 public:
  explicit GaussianTarget(const Eigen::MatrixXd &cov) : precision_(cov.inverse()) {}

  std::size_t dimension() const override {
    return static_cast<std::size_t>(precision_.rows());
  }
  double log_density(const Eigen::VectorXd &q, Eigen::VectorXd &grad) const override {
    grad = -precision_ * q;
    return 0.5 * q.dot(grad);
  }

 private:
  Eigen::MatrixXd precision_;
};

class FlatTarget : public LogDensity {
 public:
  std::size_t dimension() const override { return 1; }
  double log_density(const Eigen::VectorXd &, Eigen::VectorXd &grad) const override {
    grad = Eigen::VectorXd::Zero(1);
    return -INFINITY;
  }
};

/// Finite only for q > 0 where it is an Exponential(1) density.
class HalfLineTarget : public LogDensity {
 public:
  std::size_t dimension() const override { return 1; }
  double log_density(const Eigen::VectorXd &q, Eigen::VectorXd &grad) const override {
    grad = -Eigen::VectorXd::Ones(1);
    return q(0) > 0 ? -q(0) : -INFINITY;
  }
};

double correlation(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  const Eigen::VectorXd x = a.array() - a.mean();
  const Eigen::VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

}  // namespace

TEST_CASE("sampler config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.kept() == 1000);
  c.warmup = 2000;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.target_accept = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.chains = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.max_treedepth = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("10-D standard normal") {
  const GaussianTarget target(Eigen::MatrixXd::Identity(10, 10));
  SamplerConfig cfg;
  cfg.seed = 7;
  const auto draws = hmc_sample(target, cfg);
  REQUIRE(draws.size() == 4000);
  CHECK(draws.divergences() == 0);
  const auto &d = draws.diagnostics;
  for (std::size_t i = 0; i < 10; ++i) {
    CAPTURE(i);
    CHECK(std::abs(d.mean[i]) < 4.0 * d.mcse_mean[i]);
    CHECK(d.sd[i] > 0.9);
    CHECK(d.sd[i] < 1.1);
    CHECK(d.rhat[i] < 1.01);
  }
  for (const auto &s : draws.stats) {
    CHECK(s.step_size > 0.0);
    CHECK(s.inverse_metric.size() == 10);
    CHECK(s.treedepth.size() == 1000);
  }
}

TEST_CASE("correlated 2-D Gaussian") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.8, 0.8, 1.0;
  const GaussianTarget target(cov);
  SamplerConfig cfg;
  cfg.seed = 3;
  const auto draws = hmc_sample(target, cfg);
  CHECK(draws.divergences() == 0);
  CHECK(std::abs(correlation(draws.values.col(0), draws.values.col(1)) - 0.8) < 0.05);
  CHECK(draws.diagnostics.max_rhat() < 1.01);
}

TEST_CASE("scaled target adapts the metric") {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
  cov.diagonal() << 0.01, 1.0, 100.0;
  const GaussianTarget target(cov);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.seed = 11;
  const auto draws = hmc_sample(target, cfg);
  const Eigen::VectorXd m = draws.stats[0].inverse_metric;
  CHECK(m(0) < m(1));
  CHECK(m(1) < m(2));
  CHECK(draws.diagnostics.sd[2] == doctest::Approx(10.0).epsilon(0.15));
  CHECK(draws.diagnostics.sd[0] == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("fixed seed gives bit-identical draws") {
  const GaussianTarget target(Eigen::MatrixXd::Identity(3, 3));
  SamplerConfig cfg;
  cfg.iterations = 400;
  cfg.warmup = 200;
  cfg.seed = 42;
  const auto a = hmc_sample(target, cfg);
  cfg.threads = 1;
  const auto b = hmc_sample(target, cfg);
  CHECK(a.values == b.values);
  cfg.seed = 43;
  const auto c = hmc_sample(target, cfg);
  CHECK(a.values != c.values);
}

TEST_CASE("chains differ from each other") {
  const GaussianTarget target(Eigen::MatrixXd::Identity(2, 2));
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 300;
  cfg.warmup = 150;
  const auto d = hmc_sample(target, cfg);
  CHECK(d.values.topRows(150) != d.values.bottomRows(150));
}

TEST_CASE("bounded support is respected") {
  const HalfLineTarget target;
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.seed = 5;
  const auto d = hmc_sample(target, cfg);
  CHECK(d.values.minCoeff() > 0.0);
  CHECK(d.diagnostics.mean[0] == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("no finite initial point") {
  const FlatTarget target;
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 20;
  cfg.warmup = 10;
  CHECK_THROWS_AS(hmc_sample(target, cfg), SamplingError);
}

TEST_CASE("worker count honours the environment") {
  CHECK(worker_count(4, 2) == 2);
  CHECK(worker_count(1, 4) == 1);
  ::setenv("MDGP_THREADS", "1", 1);
  CHECK(worker_count(0, 4) == 1);
  ::unsetenv("MDGP_THREADS");
  CHECK(worker_count(0, 3) >= 1);
}
