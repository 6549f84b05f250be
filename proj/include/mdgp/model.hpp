#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mdgp/basis.hpp"
#include "mdgp/config.hpp"
#include "mdgp/data.hpp"
#include "mdgp/nuts.hpp"
#include "mdgp/observation.hpp"

namespace mdgp {

/// Training data on the model scale: continuous covariates standardized and,
/// for Gaussian models, the response too.
struct PreparedData {
  KernelExpr expr;
  Standardization scaling;
  Eigen::MatrixXd inputs;
  ResponseData response;
  std::string response_name;
};

/// Reads the config's data file with the columns the formula needs.
Dataset load_training_data(const RunConfig &config);

PreparedData prepare_training(const RunConfig &config, const Dataset &raw);

/// Model-scale inputs for new data, using the stored scaling and levels.
Eigen::MatrixXd prepare_inputs(const KernelExpr &expr,
                               const Standardization &scaling,
                               const Dataset &raw);

/// Model-scale responses of new data; `trials` is required for beta-binomial.
ResponseData prepare_response(Likelihood likelihood, const std::string &response,
                              const std::string &trials,
                              const Standardization &scaling,
                              const Dataset &raw);

/// A fitted model: everything `predict` needs without the training data.
struct FittedModel {
  RunConfig config;
  KernelExpr expr;
  Standardization scaling;
  BasisExpansion basis;
  std::string response;
  PosteriorDraws draws;

  /// Column kinds and fixed levels of the covariates.
  std::vector<ColumnSpec> covariate_specs() const;
  LevelMap levels() const;
};

/// Writes model.json and draws.csv into `dir` (created if needed).
void save_model(const std::string &dir, const FittedModel &model);
/// Throws DataError/ConfigError on a missing or malformed model directory.
FittedModel load_model(const std::string &dir);

/// Draws CSV: chain, iteration, then one column per parameter.
void write_draws_csv(const std::string &path, const PosteriorDraws &draws);
PosteriorDraws read_draws_csv(const std::string &path);

nlohmann::json diagnostics_json(const PosteriorDraws &draws);

}  // namespace mdgp
