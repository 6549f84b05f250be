#include <cmath>
#include <random>

#include "doctest.h"
#include "mdgp/diagnostics.hpp"
#include "mdgp/error.hpp"

using namespace mdgp;

namespace {

ChainSet normal_chains(int chains, int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ChainSet out;
  for (int c = 0; c < chains; ++c) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    out.push_back(v);
  }
  return out;
}

Eigen::MatrixXd stack(const ChainSet &chains) {
  const auto n = chains.front().size();
  Eigen::MatrixXd out(n * static_cast<Eigen::Index>(chains.size()), 1);
  for (std::size_t c = 0; c < chains.size(); ++c)
    out.block(static_cast<Eigen::Index>(c) * n, 0, n, 1) = chains[c];
  return out;
}

/// AR(1) chain with unit marginal variance.
Eigen::VectorXd ar1(int n, double phi, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 - phi * phi));
  Eigen::VectorXd v(n);
  double x = 0.0;
  for (int i = 0; i < n; ++i) v(i) = x = phi * x + normal(rng);
  return v;
}

}  // namespace

TEST_CASE("constant chains give NaN") {
  const ChainSet c(4, Eigen::VectorXd::Constant(200, 3.0));
  CHECK(std::isnan(split_rhat(c)));
  CHECK(std::isnan(rank_normalized_rhat(c)));
  const auto d = compute_diagnostics(stack(c), 4);
  CHECK(std::isnan(d.rhat[0]));
  CHECK(std::isnan(d.max_rhat()));
}

TEST_CASE("independent normal chains converge") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const auto c = normal_chains(4, 1000, rng);
    CHECK(rank_normalized_rhat(c) < 1.01);
    CHECK(split_rhat(c) < 1.01);
    const double e = ess_bulk(c);
    CHECK(e > 3000);
    CHECK(e < 5000);
  }
}

TEST_CASE("a shifted chain is flagged") {
  std::mt19937_64 rng(2);
  auto c = normal_chains(4, 1000, rng);
  c[2].array() += 5.0;
  CHECK(rank_normalized_rhat(c) > 1.5);
  CHECK(split_rhat(c) > 1.5);
}

TEST_CASE("trending chains are flagged by the split") {
  std::mt19937_64 rng(3);
  auto c = normal_chains(2, 1000, rng);
  for (auto &v : c)
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 6.0 * i / 1000.0;
  CHECK(rank_normalized_rhat(c) > 1.1);
}

TEST_CASE("ESS of autocorrelated chains") {
  // An AR(1) process has ESS ~ n (1 - phi) / (1 + phi).
  std::mt19937_64 rng(4);
  const double phi = 0.8;
  ChainSet c;
  for (int k = 0; k < 4; ++k) c.push_back(ar1(5000, phi, rng));
  const double expected = 20000 * (1 - phi) / (1 + phi);
  CHECK(ess(c) == doctest::Approx(expected).epsilon(0.2));
  CHECK(ess(c) < 20000);
}

TEST_CASE("diagnostics summaries") {
  std::mt19937_64 rng(5);
  const auto c = normal_chains(4, 500, rng);
  Eigen::MatrixXd values(2000, 2);
  values.col(0) = stack(c);
  values.col(1) = 2.0 * values.col(0).array() + 1.0;
  const auto d = compute_diagnostics(values, 4);
  CHECK(d.mean[1] == doctest::Approx(2.0 * d.mean[0] + 1.0));
  CHECK(d.sd[1] == doctest::Approx(2.0 * d.sd[0]));
  CHECK(d.rhat[1] == doctest::Approx(d.rhat[0]));
  CHECK(d.mcse_mean[0] == doctest::Approx(d.sd[0] / std::sqrt(ess(c))));
  CHECK_THROWS_AS(compute_diagnostics(values, 1), InvalidArgument);
  CHECK_THROWS_AS(compute_diagnostics(values.topRows(396), 4), InvalidArgument);
}
