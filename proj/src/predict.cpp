#include "mdgp/predict.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

Eigen::MatrixXd draws_on_columns(const BasisExpansion &basis,
                                 const Eigen::MatrixXd &points,
                                 const std::vector<Draw> &draws,
                                 ColumnRange range) {
  basis.check_domain(points);
  const Eigen::MatrixXd psi = basis.evaluate(points);
  const auto begin = static_cast<Eigen::Index>(range.begin);
  const auto width = static_cast<Eigen::Index>(range.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws.size()), points.rows());
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const auto &d = draws[s];
    if (d.xi.size() != psi.cols())
      throw DimensionError("draw xi length does not match the basis");
    const Eigen::VectorXd beta =
        basis.deltas(d.theta).array().sqrt().matrix().cwiseProduct(d.xi);
    out.row(static_cast<Eigen::Index>(s)) =
        (psi.middleCols(begin, width) * beta.segment(begin, width)).transpose();
  }
  return out;
}

}  // namespace

std::vector<Draw> decode_draws(const KernelExpr &expr, std::size_t M,
                               Likelihood likelihood,
                               const PosteriorDraws &draws) {
  std::vector<Draw> out;
  out.reserve(draws.size());
  for (Eigen::Index s = 0; s < draws.values.rows(); ++s)
    out.push_back(
        decode_draw(expr, M, likelihood, draws.values.row(s).transpose()));
  return out;
}

Eigen::MatrixXd draws_f_at(const BasisExpansion &basis,
                           const Eigen::MatrixXd &points,
                           const std::vector<Draw> &draws) {
  return draws_on_columns(basis, points, draws,
                          ColumnRange{0, basis.num_columns()});
}

Eigen::MatrixXd draws_component_at(const BasisExpansion &basis,
                                   const Eigen::MatrixXd &points,
                                   std::size_t j,
                                   const std::vector<Draw> &draws) {
  if (j >= basis.expr().num_terms())
    throw InvalidArgument("component index " + std::to_string(j + 1) +
                          " out of range");
  return draws_on_columns(basis, points, draws, basis.slice(j));
}

std::vector<ObsParams> obs_params(const std::vector<Draw> &draws) {
  std::vector<ObsParams> out;
  out.reserve(draws.size());
  for (const auto &d : draws) out.push_back(d.theta.obs);
  return out;
}

Eigen::MatrixXd draws_predictive(Likelihood likelihood,
                                 const Eigen::MatrixXd &f_draws,
                                 const std::vector<ObsParams> &obs,
                                 const std::optional<std::vector<int>> &trials,
                                 std::uint64_t seed) {
  if (static_cast<std::size_t>(f_draws.rows()) != obs.size())
    throw DimensionError("one set of observation parameters per draw needed");
  if (likelihood == Likelihood::BetaBinomial &&
      (!trials || static_cast<Eigen::Index>(trials->size()) != f_draws.cols()))
    throw InvalidArgument("beta-binomial prediction needs trials per point");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(f_draws.rows(), f_draws.cols());
  for (Eigen::Index s = 0; s < f_draws.rows(); ++s)
    for (Eigen::Index p = 0; p < f_draws.cols(); ++p) {
      std::optional<int> n;
      if (trials) n = (*trials)[static_cast<std::size_t>(p)];
      out(s, p) = sample_predictive(likelihood, f_draws(s, p),
                                    obs[static_cast<std::size_t>(s)], n, rng);
    }
  return out;
}

double mlpd(Likelihood likelihood, const ResponseData &test,
            const Eigen::MatrixXd &f_draws, const std::vector<ObsParams> &obs,
            MlpdMode mode) {
  const Eigen::Index S = f_draws.rows();
  const Eigen::Index P = f_draws.cols();
  if (test.size() != P) throw DimensionError("test responses and points differ");
  if (static_cast<std::size_t>(S) != obs.size())
    throw DimensionError("one set of observation parameters per draw needed");
  if (S == 0 || P == 0) throw InvalidArgument("mlpd needs draws and points");
  validate_responses(likelihood, test);
  Eigen::MatrixXd lp(S, P);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index p = 0; p < P; ++p)
      lp(s, p) = loglik_point(likelihood, test.at(p), f_draws(s, p),
                              obs[static_cast<std::size_t>(s)]);
  if (mode == MlpdMode::MeanLog) return lp.mean();
  double total = 0.0;
  for (Eigen::Index p = 0; p < P; ++p) {
    const double m = lp.col(p).maxCoeff();
    total += m + std::log((lp.col(p).array() - m).exp().mean());
  }
  return total / static_cast<double>(P);
}

}  // namespace mdgp
