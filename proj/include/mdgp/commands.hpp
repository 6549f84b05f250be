#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mdgp/config.hpp"
#include "mdgp/model.hpp"

namespace mdgp {

/// Formula of the simulated longitudinal design.
inline constexpr const char *kExperiment1Formula = "y ~ gp(age) + zs(z) * gp(age)";
inline constexpr const char *kBetaBinomialFormula =
    "successes ~ gp(x) + zs(group) * gp(x)";

struct SimulateOptions {
  std::string experiment = "exp1";  // exp1 | beta_binomial
  int n_train = 60;
  int n_test = 30;
  int per_group = 40;
  std::uint64_t seed = 1;
  std::string output_dir = "mdgp_sim";
};

/// Writes train.csv, test.csv, truth.csv and a ready-to-fit config.json.
void run_simulate(const SimulateOptions &options);

struct FitResult {
  FittedModel model;
  double max_rhat = 0.0;  // NaN when diagnostics were not computed
  double seconds = 0.0;
};

/// Samples the posterior of `config` on already loaded training data.
FitResult fit_model(const RunConfig &config, const Dataset &raw);

/// Loads the data, fits and writes model.json, draws.csv, diagnostics.json,
/// config.json (and features.csv) into config.output_dir.
FitResult run_fit(const RunConfig &config, bool dump_features = false);

struct PredictOptions {
  std::string model_dir;
  std::string data;
  std::string output_dir;
  std::uint64_t seed = 1;
  bool log_mean_exp = false;
};

struct PredictResult {
  std::size_t points = 0;
  std::size_t draws = 0;
  std::size_t out_of_domain = 0;
  std::optional<double> mlpd;  // when the response column is present
};

/// Writes predictions.csv (long format), summary.csv and report.json.
/// Values are on the original data scale.
PredictResult run_predict(const PredictOptions &options);

struct CompareRow {
  int B = 0;
  std::size_t M = 0;
  double mlpd_approx = 0.0;
  double mlpd_exact = 0.0;
  double gap = 0.0;
  double kernel_error = 0.0;  // max |K~ - K| on the training inputs
  double seconds_approx = 0.0;
  double seconds_exact = 0.0;
};

/// Exact oracle against the low-rank model for each B of config.compare,
/// on config.data / config.test_data. Gaussian only. MLPD on the original
/// scale of y. Writes compare.csv and compare.json when `write` is set.
std::vector<CompareRow> run_compare(const RunConfig &config, bool write = true);

struct BenchRow {
  int B = 0;
  int n = 0;
  std::size_t M = 0;
  double seconds = 0.0;
  long long leapfrogs = 0;
  double seconds_per_leapfrog = 0.0;
};

/// Simulated Experiment 1 data of each size and fixed-length HMC runs.
/// Repeat r uses sampler seed + r; the row is the run with the median time.
/// Writes bench.csv when `write` is set.
std::vector<BenchRow> run_bench(const RunConfig &config, bool write = true);

}  // namespace mdgp
