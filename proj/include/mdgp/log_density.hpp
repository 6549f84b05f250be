#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mdgp {

/// A differentiable log density over an unconstrained real vector, the
/// interface consumed by the sampler. Implementations must be safe to call
/// concurrently from several chains.
class LogDensity {
 public:
  virtual ~LogDensity() = default;

  virtual std::size_t dimension() const = 0;

  /// Log density at `q`; fills `grad` (resized by the callee). May return a
  /// non-finite value, which the sampler treats as -infinity.
  virtual double log_density(const Eigen::VectorXd &q,
                             Eigen::VectorXd &grad) const = 0;

  /// Names of the values returned by `constrain`.
  virtual std::vector<std::string> output_names() const;

  /// Maps an unconstrained state to the reported (constrained) values.
  virtual Eigen::VectorXd constrain(const Eigen::VectorXd &q) const {
    return q;
  }
};

}  // namespace mdgp
