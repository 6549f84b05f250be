#include "mdgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "mdgp/error.hpp"

namespace mdgp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_constant(const ChainSet &chains) {
  const double first = chains.front()(0);
  for (const auto &c : chains)
    if ((c.array() != first).any()) return false;
  return true;
}

ChainSet split(const ChainSet &chains) {
  ChainSet out;
  for (const auto &c : chains) {
    const Eigen::Index half = c.size() / 2;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));
  }
  return out;
}

double sample_variance(const Eigen::VectorXd &x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

// Rank-normalizes all draws jointly: z = Phi^-1((r - 3/8) / (S + 1/4)) with
// average ranks for ties.
ChainSet rank_normalize(const ChainSet &chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (Eigen::Index i = 0; i < chains[c].size(); ++i)
      all.emplace_back(chains[c](i), all.size());
  const std::size_t S = all.size();
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return all[a].first < all[b].first;
  });
  std::vector<double> rank(S);
  for (std::size_t i = 0; i < S;) {
    std::size_t j = i;
    while (j + 1 < S && all[order[j + 1]].first == all[order[i]].first) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> normal;
  ChainSet out;
  std::size_t k = 0;
  for (const auto &c : chains) {
    Eigen::VectorXd z(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i, ++k)
      z(i) = boost::math::quantile(
          normal, (rank[k] - 0.375) / (static_cast<double>(S) + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

double rhat_of(const ChainSet &chains) {
  const auto m = static_cast<double>(chains.size());
  const auto n = static_cast<double>(chains.front().size());
  Eigen::VectorXd means(chains.size());
  double W = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    means(static_cast<Eigen::Index>(c)) = chains[c].mean();
    W += sample_variance(chains[c]);
  }
  W /= m;
  const double B = n * sample_variance(means);
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double autocovariance(const Eigen::VectorXd &x, double mean, Eigen::Index lag) {
  const Eigen::Index n = x.size();
  double s = 0.0;
  for (Eigen::Index i = 0; i + lag < n; ++i)
    s += (x(i) - mean) * (x(i + lag) - mean);
  return s / static_cast<double>(n);
}

double ess_of(const ChainSet &chains) {
  const std::size_t m = chains.size();
  const Eigen::Index n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    vars[c] = autocovariance(chains[c], means[c], 0) * static_cast<double>(n) /
              static_cast<double>(n - 1);
  }
  const double mean_var =
      std::accumulate(vars.begin(), vars.end(), 0.0) / static_cast<double>(m);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) {
    Eigen::Map<const Eigen::VectorXd> mv(means.data(),
                                         static_cast<Eigen::Index>(m));
    var_plus += sample_variance(mv);
  }
  auto rho_at = [&](Eigen::Index lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c)
      acov += autocovariance(chains[c], means[c], lag);
    acov /= static_cast<double>(m);
    return 1.0 - (mean_var - acov) / var_plus;
  };

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[1] = rho_odd;
  Eigen::Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = rho_at(t + 1);
    rho_odd = rho_at(t + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<std::size_t>(t + 1)] = rho_even;
      rho[static_cast<std::size_t>(t + 2)] = rho_odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n)
    rho[static_cast<std::size_t>(max_t + 1)] = rho_even;

  // Initial monotone sequence.
  for (t = 1; t <= max_t - 2; t += 2) {
    const auto i = static_cast<std::size_t>(t);
    if (rho[i + 1] + rho[i + 2] > rho[i - 1] + rho[i]) {
      rho[i + 1] = 0.5 * (rho[i - 1] + rho[i]);
      rho[i + 2] = rho[i + 1];
    }
  }
  const double total = static_cast<double>(m) * static_cast<double>(n);
  double tau = -1.0;
  for (Eigen::Index i = 0; i <= max_t && i < n; ++i)
    tau += 2.0 * rho[static_cast<std::size_t>(i)];
  if (max_t + 1 < n) tau += rho[static_cast<std::size_t>(max_t + 1)];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

void check_chains(const ChainSet &chains) {
  if (chains.size() < 2) throw InvalidArgument("need at least 2 chains");
  const Eigen::Index n = chains.front().size();
  if (n < 4) throw InvalidArgument("need at least 4 draws per chain");
  for (const auto &c : chains)
    if (c.size() != n) throw InvalidArgument("chains differ in length");
}

}  // namespace

double Diagnostics::max_rhat() const {
  double best = kNaN;
  for (double r : rhat)
    if (std::isfinite(r) && !(r <= best)) best = r;
  return best;
}

double split_rhat(const ChainSet &chains) {
  check_chains(chains);
  if (is_constant(chains)) return kNaN;
  return rhat_of(split(chains));
}

double rank_normalized_rhat(const ChainSet &chains) {
  check_chains(chains);
  if (is_constant(chains)) return kNaN;
  const ChainSet s = split(chains);
  const double bulk = rhat_of(rank_normalize(s));
  // Folded draws |x - median| for the tail R-hat.
  std::vector<double> all;
  for (const auto &c : s) all.insert(all.end(), c.data(), c.data() + c.size());
  std::nth_element(all.begin(), all.begin() + static_cast<long>(all.size() / 2),
                   all.end());
  double median = all[all.size() / 2];
  if (all.size() % 2 == 0) {
    const double lower =
        *std::max_element(all.begin(), all.begin() + static_cast<long>(all.size() / 2));
    median = 0.5 * (median + lower);
  }
  ChainSet folded;
  for (const auto &c : s) folded.push_back((c.array() - median).abs().matrix());
  const double tail = rhat_of(rank_normalize(folded));
  return std::max(bulk, tail);
}

double ess(const ChainSet &chains) {
  check_chains(chains);
  if (is_constant(chains)) return kNaN;
  return ess_of(split(chains));
}

double ess_bulk(const ChainSet &chains) {
  check_chains(chains);
  if (is_constant(chains)) return kNaN;
  return ess_of(rank_normalize(split(chains)));
}

Diagnostics compute_diagnostics(const Eigen::MatrixXd &values,
                                std::size_t chains) {
  if (chains < 2) throw InvalidArgument("diagnostics need at least 2 chains");
  if (values.rows() % static_cast<Eigen::Index>(chains) != 0)
    throw DimensionError("draw count is not a multiple of the chain count");
  const Eigen::Index n = values.rows() / static_cast<Eigen::Index>(chains);
  if (n < 100)
    throw InvalidArgument("diagnostics need at least 100 draws per chain");
  Diagnostics d;
  for (Eigen::Index p = 0; p < values.cols(); ++p) {
    ChainSet cs;
    for (std::size_t c = 0; c < chains; ++c)
      cs.push_back(values.col(p).segment(static_cast<Eigen::Index>(c) * n, n));
    const Eigen::VectorXd col = values.col(p);
    const double mean = col.mean();
    const double sd = std::sqrt(sample_variance(col));
    d.mean.push_back(mean);
    d.sd.push_back(sd);
    d.rhat.push_back(rank_normalized_rhat(cs));
    d.ess_bulk.push_back(ess_bulk(cs));
    const double e = ess(cs);
    d.mcse_mean.push_back(std::isfinite(e) ? sd / std::sqrt(e) : 0.0);
  }
  return d;
}

}  // namespace mdgp
