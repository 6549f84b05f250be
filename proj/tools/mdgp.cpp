#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mdgp/commands.hpp"
#include "mdgp/error.hpp"

namespace {

using nlohmann::json;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<std::string> output_dir;
  std::optional<double> c;
};

void add_common(CLI::App *cmd, Overrides &o) {
  cmd->add_option("--seed", o.seed, "Sampler seed");
  cmd->add_option("--chains", o.chains, "Number of HMC chains");
  cmd->add_option("--output-dir", o.output_dir, "Directory for the outputs");
  cmd->add_option("--c", o.c, "Domain scaling factor c");
}

mdgp::RunConfig resolve(const Overrides &o, bool config_required) {
  mdgp::RunConfig config;
  if (!o.config.empty())
    config = mdgp::load_config(o.config);
  else if (config_required)
    throw mdgp::ConfigError("--config is required");
  if (o.seed) config.sampler.seed = *o.seed;
  if (o.chains) config.sampler.chains = *o.chains;
  if (o.output_dir) config.output_dir = *o.output_dir;
  if (o.c) config.basis.scale = *o.c;
  return config;
}

int fail(const std::string &code, const std::string &message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Low-rank mixed-domain Gaussian process models"};
  app.require_subcommand(1);

  mdgp::SimulateOptions sim;
  auto *simulate = app.add_subcommand("simulate", "Write a simulated data set");
  simulate->add_option("--experiment", sim.experiment, "exp1 or beta_binomial")
      ->check(CLI::IsMember({"exp1", "beta_binomial"}));
  simulate->add_option("--n-train", sim.n_train, "Training rows (exp1)");
  simulate->add_option("--n-test", sim.n_test, "Test rows (exp1)");
  simulate->add_option("--per-group", sim.per_group, "Rows per group (beta_binomial)");
  simulate->add_option("--seed", sim.seed, "Simulation seed");
  simulate->add_option("--output-dir", sim.output_dir, "Output directory");

  Overrides fit_o;
  std::optional<int> fit_B;
  bool marginalized = false, dump_features = false;
  auto *fit = app.add_subcommand("fit", "Fit a model by HMC");
  fit->add_option("--config", fit_o.config, "Config file (JSON)")->required();
  add_common(fit, fit_o);
  fit->add_option("--B", fit_B, "Basis functions per continuous factor");
  fit->add_flag("--marginalized", marginalized,
                "Gaussian only: sample theta with xi integrated out");
  fit->add_flag("--dump-features", dump_features, "Write features.csv");

  mdgp::PredictOptions pred;
  auto *predict = app.add_subcommand("predict", "Predict from a fitted model");
  predict->add_option("--model", pred.model_dir, "Model directory from fit")->required();
  predict->add_option("--data", pred.data, "CSV with the points to predict")->required();
  predict->add_option("--output-dir", pred.output_dir, "Output directory")->required();
  predict->add_option("--seed", pred.seed, "Seed for predictive draws");
  predict->add_flag("--log-mean-exp", pred.log_mean_exp,
                    "Mix draws per point in the MLPD instead of averaging logs");

  Overrides cmp_o;
  std::vector<int> cmp_B;
  std::string oracle;
  auto *compare = app.add_subcommand("compare", "Exact oracle against the low-rank model");
  compare->add_option("--config", cmp_o.config, "Config file (JSON)")->required();
  add_common(compare, cmp_o);
  compare->add_option("--B", cmp_B, "Comma-separated basis sizes")->delimiter(',');
  compare->add_option("--oracle", oracle, "fixed or hmc")
      ->check(CLI::IsMember({"fixed", "hmc"}));

  Overrides bench_o;
  std::vector<int> bench_n, bench_B;
  std::optional<int> iterations, warmup, repeats;
  auto *bench = app.add_subcommand("bench", "Time fixed-length HMC runs over N and B");
  bench->add_option("--config", bench_o.config, "Config file (JSON)");
  add_common(bench, bench_o);
  bench->add_option("--n", bench_n, "Comma-separated data sizes")->delimiter(',');
  bench->add_option("--B", bench_B, "Comma-separated basis sizes")->delimiter(',');
  bench->add_option("--iterations", iterations, "HMC iterations including warmup");
  bench->add_option("--warmup", warmup, "Warmup iterations");
  bench->add_option("--repeats", repeats, "Runs per cell, the median is reported");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return fail("usage", e.what());
  }

  try {
    if (*simulate) {
      mdgp::run_simulate(sim);
      std::cout << json{{"output_dir", sim.output_dir}}.dump() << '\n';
      return 0;
    }
    if (*fit) {
      auto config = resolve(fit_o, true);
      if (fit_B) config.basis.num_basis = *fit_B;
      if (marginalized) config.marginalized = true;
      const auto result = mdgp::run_fit(config, dump_features);
      const bool suspect = std::isfinite(result.max_rhat) && result.max_rhat > 1.05;
      std::cout << json{{"output_dir", config.output_dir},
                        {"draws", result.model.draws.size()},
                        {"divergences", result.model.draws.divergences()},
                        {"max_rhat", std::isfinite(result.max_rhat)
                                         ? json(result.max_rhat)
                                         : json(nullptr)},
                        {"seconds", result.seconds}}
                       .dump()
                << '\n';
      return suspect ? 2 : 0;
    }
    if (*predict) {
      const auto result = mdgp::run_predict(pred);
      std::cout << json{{"output_dir", pred.output_dir},
                        {"points", result.points},
                        {"draws", result.draws},
                        {"mlpd", result.mlpd ? json(*result.mlpd) : json(nullptr)}}
                       .dump()
                << '\n';
      return 0;
    }
    if (*compare) {
      auto config = resolve(cmp_o, true);
      if (!cmp_B.empty()) config.compare.basis_sizes = cmp_B;
      if (oracle == "fixed") config.compare.oracle = mdgp::Oracle::Fixed;
      if (oracle == "hmc") config.compare.oracle = mdgp::Oracle::Hmc;
      const auto rows = mdgp::run_compare(config);
      json out = json::array();
      for (const auto &r : rows)
        out.push_back({{"B", r.B}, {"M", r.M}, {"mlpd_approx", r.mlpd_approx},
                       {"mlpd_exact", r.mlpd_exact}, {"gap", r.gap}});
      std::cout << out.dump() << '\n';
      return 0;
    }
    if (*bench) {
      auto config = resolve(bench_o, false);
      if (config.formula.empty()) config.formula = mdgp::kExperiment1Formula;
      if (!bench_n.empty()) config.bench.sizes = bench_n;
      if (!bench_B.empty()) config.bench.basis_sizes = bench_B;
      if (iterations) config.bench.iterations = *iterations;
      if (warmup) config.bench.warmup = *warmup;
      if (repeats) config.bench.repeats = *repeats;
      if (bench_o.chains) config.bench.chains = *bench_o.chains;
      const auto rows = mdgp::run_bench(config);
      json out = json::array();
      for (const auto &r : rows)
        out.push_back({{"B", r.B}, {"n", r.n}, {"M", r.M}, {"seconds", r.seconds},
                       {"leapfrogs", r.leapfrogs}});
      std::cout << out.dump() << '\n';
      return 0;
    }
  } catch (const mdgp::Error &e) {
    return fail(e.code(), e.what());
  } catch (const std::exception &e) {
    return fail("internal", e.what());
  }
  return 0;
}
