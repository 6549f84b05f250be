#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace mdgp {

/// Per-parameter convergence summaries.
struct Diagnostics {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<double> rhat;      // rank-normalized split R-hat, NaN if constant
  std::vector<double> ess_bulk;  // rank-normalized bulk ESS
  std::vector<double> mcse_mean;
  std::size_t divergences = 0;

  /// Largest finite R-hat (NaN entries skipped).
  double max_rhat() const;
};

/// `chains[c]` holds the draws of one chain for one parameter.
using ChainSet = std::vector<Eigen::VectorXd>;

/// Classic split R-hat on raw values.
double split_rhat(const ChainSet &chains);
/// max(bulk, tail) rank-normalized split R-hat.
double rank_normalized_rhat(const ChainSet &chains);
/// ESS of the split chains with Geyer's initial monotone sequence.
double ess(const ChainSet &chains);
double ess_bulk(const ChainSet &chains);

/// `values` is (chains * draws_per_chain) x dim, chain-major. Throws
/// InvalidArgument for fewer than 2 chains or 100 draws per chain.
Diagnostics compute_diagnostics(const Eigen::MatrixXd &values,
                                std::size_t chains);

}  // namespace mdgp
