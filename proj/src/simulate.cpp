#include "mdgp/simulate.hpp"

#include <cmath>
#include <random>

#include "mdgp/error.hpp"
#include "mdgp/exact_gp.hpp"
#include "mdgp/observation.hpp"

namespace mdgp {

namespace {

Eigen::VectorXd draw_mvn(const Eigen::MatrixXd &K, std::mt19937_64 &rng) {
  const SpdFactor factor = factorize_spd(K);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd e(K.rows());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  return factor.llt.matrixL() * e;
}

std::vector<std::string> numbered_labels(int from, int to) {
  std::vector<std::string> out;
  for (int i = from; i <= to; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

Experiment1 simulate_experiment1(int n_train, int n_test, std::uint64_t seed) {
  if (n_train <= 0 || n_train % 6 != 0)
    throw InvalidArgument("n_train must be a positive multiple of 6");
  if (n_test <= 0 || n_test % 3 != 0)
    throw InvalidArgument("n_test must be a positive multiple of 3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> age_dist(0.0, 10.0);

  const int per_train = n_train / 6;
  const int per_test = n_test / 3;
  const int total = n_train + n_test;
  std::vector<int> id(static_cast<std::size_t>(total));
  std::vector<double> age(static_cast<std::size_t>(total));
  std::size_t r = 0;
  for (int i = 1; i <= 9; ++i) {
    const int count = i <= 6 ? per_train : per_test;
    for (int k = 0; k < count; ++k, ++r) {
      id[r] = i;
      age[r] = age_dist(rng);
    }
  }

  Eigen::MatrixXd K1(total, total), K2(total, total);
  for (int a = 0; a < total; ++a)
    for (int b = 0; b < total; ++b) {
      const auto ua = static_cast<std::size_t>(a);
      const auto ub = static_cast<std::size_t>(b);
      const double za = (id[ua] - 1) % 3;
      const double zb = (id[ub] - 1) % 3;
      K1(a, b) = eq_value(age[ua], age[ub], 2.0);
      K2(a, b) = eq_value(age[ua], age[ub], 1.0) * (za == zb ? 1.0 : -0.5);
    }
  const Eigen::VectorXd f1 = draw_mvn(K1, rng);
  const Eigen::VectorXd f2 = draw_mvn(K2, rng);
  const Eigen::VectorXd f = f1 + f2;

  std::normal_distribution<double> noise(0.0, 0.5);
  Column id_col{"id", ColumnKind::Categorical, {}, {}};
  Column z_col{"z", ColumnKind::Categorical, {}, numbered_labels(1, 3)};
  Column age_col{"age", ColumnKind::Continuous, {}, {}};
  Column y_col{"y", ColumnKind::Continuous, {}, {}};
  Column id_tr = id_col, z_tr = z_col, age_tr = age_col, y_tr = y_col;
  Column id_te = id_col, z_te = z_col, age_te = age_col, y_te = y_col;
  id_tr.labels = numbered_labels(1, 6);
  id_te.labels = numbered_labels(7, 9);
  Experiment1 out;
  out.f_train.resize(n_train);
  out.f1_train.resize(n_train);
  out.f2_train.resize(n_train);
  out.f_test.resize(n_test);
  out.f1_test.resize(n_test);
  out.f2_test.resize(n_test);
  for (int n = 0; n < total; ++n) {
    const auto u = static_cast<std::size_t>(n);
    const double y = 100.0 + 10.0 * (f(n) + noise(rng));
    const double z = (id[u] - 1) % 3;
    const bool train = id[u] <= 6;
    (train ? id_tr : id_te).values.push_back(id[u] - (train ? 1 : 7));
    (train ? z_tr : z_te).values.push_back(z);
    (train ? age_tr : age_te).values.push_back(age[u]);
    (train ? y_tr : y_te).values.push_back(y);
    const Eigen::Index k = train ? n : n - n_train;
    (train ? out.f_train : out.f_test)(k) = f(n);
    (train ? out.f1_train : out.f1_test)(k) = f1(n);
    (train ? out.f2_train : out.f2_test)(k) = f2(n);
  }
  out.train = Dataset({id_tr, z_tr, age_tr, y_tr});
  out.test = Dataset({id_te, z_te, age_te, y_te});
  return out;
}

double beta_binomial_truth(double x, int group) {
  static constexpr double kGroupEffect[3] = {0.5, -0.2, -0.3};
  return 0.8 * std::sin(0.6 * x) +
         kGroupEffect[group] * std::cos(0.4 * x);
}

BetaBinomialSim simulate_beta_binomial(int per_group, std::uint64_t seed) {
  if (per_group < 1) throw InvalidArgument("per_group must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x_dist(0.0, 10.0);
  std::uniform_int_distribution<int> trials_dist(80, 120);
  BetaBinomialSim out;
  const int N = 3 * per_group;
  out.f.resize(N);
  out.eta.resize(N);
  Column x{"x", ColumnKind::Continuous, {}, {}};
  Column group{"group", ColumnKind::Categorical, {}, {"a", "b", "c"}};
  Column successes{"successes", ColumnKind::Continuous, {}, {}};
  Column trials{"trials", ColumnKind::Continuous, {}, {}};
  ObsParams params;
  params.gamma = out.gamma;
  params.intercept = out.intercept;
  int n = 0;
  for (int g = 0; g < 3; ++g)
    for (int k = 0; k < per_group; ++k, ++n) {
      const double xv = x_dist(rng);
      const int nt = trials_dist(rng);
      const double f = beta_binomial_truth(xv, g);
      out.f(n) = f;
      out.eta(n) = f + out.intercept;
      x.values.push_back(xv);
      group.values.push_back(g);
      trials.values.push_back(nt);
      successes.values.push_back(
          sample_predictive(Likelihood::BetaBinomial, f, params, nt, rng));
    }
  out.data = Dataset({x, group, successes, trials});
  return out;
}

}  // namespace mdgp
