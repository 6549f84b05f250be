#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdgp/basis.hpp"
#include "mdgp/data.hpp"
#include "mdgp/nuts.hpp"
#include "mdgp/observation.hpp"
#include "mdgp/priors.hpp"

namespace mdgp {

/// Hyperparameters on the original data scale, used by `compare`.
struct ThetaSpec {
  std::vector<double> magnitude;
  std::vector<std::vector<double>> lengthscale;
  double sigma = 1.0;
};

enum class Oracle { Fixed, Hmc };

struct CompareSettings {
  std::vector<int> basis_sizes{8, 16, 32};
  Oracle oracle = Oracle::Fixed;
  std::optional<ThetaSpec> theta;
};

struct BenchSettings {
  std::vector<int> sizes{250, 500, 1000};
  std::vector<int> basis_sizes{16};
  int iterations = 200;
  int warmup = 100;
  int chains = 1;
  int repeats = 1;
};

/// Everything a CLI run needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  std::string formula;
  Likelihood likelihood = Likelihood::Gaussian;
  std::string data;
  std::string test_data;
  std::string trials = "trials";
  std::map<std::string, Eigen::MatrixXd> custom_matrices;
  BasisConfig basis;
  PriorSpec priors;
  SamplerConfig sampler;
  bool marginalized = false;
  std::string output_dir = "mdgp_out";
  CompareSettings compare;
  BenchSettings bench;

  void validate() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json &j,
                           const std::string &base_dir = "");
nlohmann::json config_to_json(const RunConfig &config);
RunConfig load_config(const std::string &path);

/// Response name and the covariates named in a formula with the kind each
/// factor implies, in order of first appearance. Throws FormulaError when a
/// covariate is used both as continuous and as categorical.
struct FormulaColumns {
  std::string response;
  std::vector<ColumnSpec> covariates;

  std::vector<std::string> names() const;
};
FormulaColumns formula_columns(const std::string &formula);

}  // namespace mdgp
