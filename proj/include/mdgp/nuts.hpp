#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdgp/diagnostics.hpp"
#include "mdgp/log_density.hpp"

namespace mdgp {

/// `iterations` counts warmup plus kept iterations.
struct SamplerConfig {
  int chains = 4;
  int iterations = 2000;
  int warmup = 1000;
  double target_accept = 0.95;
  int max_treedepth = 10;
  std::uint64_t seed = 1;
  double init_radius = 2.0;
  int threads = 0;  // 0: one per chain, capped by MDGP_THREADS

  int kept() const { return iterations - warmup; }
  void validate() const;
};

struct ChainStats {
  double step_size = 0.0;
  Eigen::VectorXd inverse_metric;
  std::vector<int> treedepth;       // kept iterations
  std::vector<int> leapfrogs;       // kept iterations
  std::vector<char> divergent;      // kept iterations
  std::vector<double> accept_stat;  // kept iterations
  long long total_leapfrogs = 0;    // warmup included
  double seconds = 0.0;

  std::size_t divergences() const;
};

/// Kept draws on the constrained scale.
struct PosteriorDraws {
  std::vector<std::string> names;
  Eigen::MatrixXd values;        // (chains * draws_per_chain) x dim, chain-major
  Eigen::MatrixXd unconstrained;  // same rows, sampler coordinates
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<ChainStats> stats;
  Diagnostics diagnostics;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t divergences() const;
  std::size_t column(const std::string &name) const;
};

/// Workers for `requested` parallel tasks after applying MDGP_THREADS.
int worker_count(int requested, int tasks);

/// Multinomial no-U-turn HMC with a diagonal metric, dual-averaging step
/// size and windowed metric adaptation during warmup. Chains start from
/// uniform(-init_radius, init_radius) per coordinate and run in parallel.
/// Throws SamplingError when no finite initial point is found or a chain
/// diverges on every kept iteration.
PosteriorDraws hmc_sample(const LogDensity &target,
                          const SamplerConfig &config);

}  // namespace mdgp
