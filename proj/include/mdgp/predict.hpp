#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/basis.hpp"
#include "mdgp/inference.hpp"
#include "mdgp/nuts.hpp"
#include "mdgp/observation.hpp"

namespace mdgp {

/// Decodes every row of `draws.values`.
std::vector<Draw> decode_draws(const KernelExpr &expr, std::size_t M,
                               Likelihood likelihood,
                               const PosteriorDraws &draws);

/// S x P matrix of f draws at standardized `points`:
/// row s = Psi-dagger* diag(sqrt(delta(theta_s))) xi_s. Warns when points fall
/// outside the expansion domain; throws DimensionError for a level the basis
/// has not seen.
Eigen::MatrixXd draws_f_at(const BasisExpansion &basis,
                           const Eigen::MatrixXd &points,
                           const std::vector<Draw> &draws);

/// Same restricted to the columns of term j.
Eigen::MatrixXd draws_component_at(const BasisExpansion &basis,
                                   const Eigen::MatrixXd &points,
                                   std::size_t j,
                                   const std::vector<Draw> &draws);

/// One predictive response per (draw, point). Beta-binomial needs `trials`.
Eigen::MatrixXd draws_predictive(Likelihood likelihood,
                                 const Eigen::MatrixXd &f_draws,
                                 const std::vector<ObsParams> &obs,
                                 const std::optional<std::vector<int>> &trials,
                                 std::uint64_t seed);

enum class MlpdMode {
  MeanLog,     // (1 / SP) sum_s sum_p log p(y_p | theta_s, f_ps)
  LogMeanExp,  // (1 / P) sum_p log (1 / S) sum_s p(y_p | theta_s, f_ps)
};

/// Mean log predictive density of `test` given S x P latent draws and the
/// matching observation parameters.
double mlpd(Likelihood likelihood, const ResponseData &test,
            const Eigen::MatrixXd &f_draws, const std::vector<ObsParams> &obs,
            MlpdMode mode = MlpdMode::MeanLog);

std::vector<ObsParams> obs_params(const std::vector<Draw> &draws);

}  // namespace mdgp
