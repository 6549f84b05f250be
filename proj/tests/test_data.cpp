#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "mdgp/error.hpp"
#include "mdgp/data.hpp"
#include "mdgp/exact_gp.hpp"
#include "mdgp/simulate.hpp"

using namespace mdgp;

namespace {

const std::vector<ColumnSpec> kAgeZY{{"age", ColumnKind::Continuous},
                                     {"z", ColumnKind::Categorical},
                                     {"y", ColumnKind::Continuous}};

std::string temp_path(const std::string &name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("parse a small CSV") {
  const auto d = parse_csv("age,z,y\n1.5,a,3\n2,b,4\n0.5,a,-1\n", kAgeZY);
  CHECK(d.rows() == 3);
  CHECK(d.column("z").labels == std::vector<std::string>{"a", "b"});
  CHECK(d.column("z").values == std::vector<double>{0, 1, 0});
  CHECK(d.column("age").values[2] == 0.5);
}

TEST_CASE("CSV quoting, CRLF and extra columns") {
  const auto d = parse_csv(
      "id,\"z\",age,y\r\n1,\"x, y\",1,2\r\n2,\"say \"\"hi\"\"\",3,4\r\n", kAgeZY);
  CHECK(d.rows() == 2);
  CHECK(d.column("z").labels[0] == "x, y");
  CHECK(d.column("z").labels[1] == "say \"hi\"");
  CHECK_FALSE(d.has("id"));
}

TEST_CASE("CSV errors") {
  CHECK_THROWS_AS(parse_csv("", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z\n1,a\n", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z,y\n1,a,NA\n", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z,y\n1,a,\n", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z,y\nabc,a,1\n", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z,y\n1,a\n", kAgeZY), DataError);
  CHECK_THROWS_AS(parse_csv("age,z,y\n1,\"a,1\n", kAgeZY), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", kAgeZY), DataError);
}

TEST_CASE("known levels reject unseen labels") {
  const LevelMap levels{{"z", {"a", "b"}}};
  const auto d = parse_csv("age,z,y\n1,b,1\n2,a,1\n", kAgeZY, levels);
  CHECK(d.column("z").values == std::vector<double>{1, 0});
  CHECK_THROWS_AS(parse_csv("age,z,y\n1,c,1\n", kAgeZY, levels), DataError);
}

TEST_CASE("write then read is the identity") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1e3);
  Column age{"age", ColumnKind::Continuous, {}, {}};
  Column z{"z", ColumnKind::Categorical, {}, {"p, q", "r\"s", "t"}};
  Column y{"y", ColumnKind::Continuous, {}, {}};
  for (int n = 0; n < 50; ++n) {
    age.values.push_back(normal(rng));
    z.values.push_back(n % 3);
    y.values.push_back(normal(rng) * 1e-7);
  }
  const Dataset d({age, z, y});
  const auto path = temp_path("mdgp_roundtrip.csv");
  write_csv(path, d);
  const auto back = load_csv(path, kAgeZY, level_map(d));
  std::remove(path.c_str());
  for (const auto &name : {"age", "z", "y"})
    CHECK(back.column(name).values == d.column(name).values);
  CHECK(back.column("z").labels == d.column("z").labels);
}

TEST_CASE("standardization") {
  Column c{"a", ColumnKind::Continuous, {0.0, 10.0}, {}};
  const auto [d, s] = standardize(Dataset({c}), {"a"});
  CHECK(d.column("a").values[0] == doctest::Approx(-0.70711).epsilon(1e-5));
  CHECK(d.column("a").values[1] == doctest::Approx(0.70711).epsilon(1e-5));
  const auto back = s.invert(d);
  CHECK(std::abs(back.column("a").values[1] - 10.0) < 1e-12);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(3.0, 7.0);
  Column r{"r", ColumnKind::Continuous, {}, {}};
  for (int n = 0; n < 200; ++n) r.values.push_back(normal(rng));
  const auto [rs, sr] = standardize(Dataset({r}), {"r"});
  const auto [rs2, sr2] = standardize(rs, {"r"});
  for (std::size_t n = 0; n < 200; ++n)
    CHECK(std::abs(rs2.column("r").values[n] - rs.column("r").values[n]) < 1e-12);
  const auto inv = sr.invert(rs);
  for (std::size_t n = 0; n < 200; ++n)
    CHECK(std::abs(inv.column("r").values[n] - r.values[n]) < 1e-12);

  const auto j = Standardization::from_json(sr.to_json());
  CHECK(j.scaling("r").mean == sr.scaling("r").mean);
  CHECK(j.scaling("r").sd == sr.scaling("r").sd);

  Column flat{"f", ColumnKind::Continuous, {2.0, 2.0, 2.0}, {}};
  CHECK_THROWS_AS(standardize(Dataset({flat}), {"f"}), DataError);
  Column cat{"z", ColumnKind::Categorical, {0, 1}, {"a", "b"}};
  CHECK_THROWS_AS(standardize(Dataset({cat}), {"z"}), DataError);
}

TEST_CASE("covariate space from data") {
  const auto d = parse_csv("age,z,y\n1,a,3\n5,b,4\n3,c,0\n", kAgeZY);
  const auto space = make_space(d, {"age", "z"});
  CHECK(space.is_continuous(0));
  CHECK(space.num_categories(1) == 3);
  const Eigen::MatrixXd X = d.covariates(space);
  CHECK(X(1, 0) == 5.0);
  CHECK(X(2, 1) == 2.0);
  CHECK_THROWS_AS(make_space(d, {"nope"}), DataError);
}

TEST_CASE("dataset construction errors") {
  Column a{"a", ColumnKind::Continuous, {1, 2}, {}};
  Column b{"b", ColumnKind::Continuous, {1}, {}};
  CHECK_THROWS_AS(Dataset({a, b}), DataError);
  CHECK_THROWS_AS(Dataset({a, a}), DataError);
  const Dataset d({a});
  CHECK(d.select({1}).column("a").values == std::vector<double>{2});
}

TEST_CASE("Experiment 1 simulator layout") {
  const auto e = simulate_experiment1(60, 30, 4);
  CHECK(e.train.rows() == 60);
  CHECK(e.test.rows() == 30);
  CHECK(e.train.column("id").labels.size() == 6);
  CHECK(e.test.column("id").labels == std::vector<std::string>{"7", "8", "9"});
  for (std::size_t n = 0; n < 60; ++n) {
    const int id = std::stoi(e.train.column("id").labels[static_cast<std::size_t>(
        e.train.column("id").values[n])]);
    const int z = static_cast<int>(e.train.column("z").values[n]) + 1;
    CHECK((id - 1) % 3 + 1 == z);
    const double age = e.train.column("age").values[n];
    CHECK((age >= 0.0 && age <= 10.0));
  }
  CHECK((e.f_train - e.f1_train - e.f2_train).cwiseAbs().maxCoeff() < 1e-12);
  const auto again = simulate_experiment1(60, 30, 4);
  CHECK(again.train.column("y").values == e.train.column("y").values);
  CHECK(simulate_experiment1(60, 30, 5).train.column("y").values !=
        e.train.column("y").values);
  CHECK_THROWS_AS(simulate_experiment1(61, 30, 1), InvalidArgument);
  CHECK_THROWS_AS(simulate_experiment1(60, 31, 1), InvalidArgument);
}

TEST_CASE("simulated group kernel rows sum to zero") {
  const auto space = CovariateSpace({ContinuousDim{"age", 0.0, 10.0},
                                     CategoricalDim{"z", {"1", "2", "3"}}});
  const auto e = parse_formula("y ~ zs(z) * gp(age)", space);
  Eigen::MatrixXd X(3, 2);
  X << 4.0, 0, 4.0, 1, 4.0, 2;
  Eigen::MatrixXd P(1, 2);
  P << 6.5, 1;
  CHECK(std::abs(kernel_matrix(e, HyperParams::unit(e), P, X).sum()) < 1e-14);
}

TEST_CASE("simulated response variance") {
  // Var y = 100 (Var f + 0.25) with Var f = alpha_1^2 + alpha_2^2 = 2.
  double total = 0.0;
  const int reps = 40;
  for (int s = 0; s < reps; ++s) {
    const auto e = simulate_experiment1(300, 3, 100 + s);
    const auto &y = e.train.column("y").values;
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    total += ss / (static_cast<double>(y.size()) - 1.0);
  }
  CHECK(total / reps == doctest::Approx(225.0).epsilon(0.15));
}

TEST_CASE("beta-binomial simulator") {
  const auto sim = simulate_beta_binomial(40, 3);
  CHECK(sim.data.rows() == 120);
  const auto &k = sim.data.column("successes").values;
  const auto &n = sim.data.column("trials").values;
  for (std::size_t i = 0; i < 120; ++i) {
    CHECK(k[i] >= 0);
    CHECK(k[i] <= n[i]);
    CHECK((n[i] >= 80 && n[i] <= 120));
  }
  CHECK(sim.f(0) == beta_binomial_truth(sim.data.column("x").values[0], 0));
  CHECK((sim.eta.array() - sim.f.array()).abs().maxCoeff() - 0.3 < 1e-12);
}
