#pragma once

#include <stdexcept>
#include <string>

namespace mdgp {

/// Base class for all library errors. `code()` is a short machine-readable
/// category that the CLI writes into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string &what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string &code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct FormulaError : Error {
  explicit FormulaError(const std::string &what) : Error("formula", what) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string &what)
      : Error("dimension", what) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string &what)
      : Error("invalid_argument", what) {}
};

struct NotPositiveSemidefinite : Error {
  explicit NotPositiveSemidefinite(const std::string &what)
      : Error("not_psd", what) {}
};

struct SingularCovariance : Error {
  explicit SingularCovariance(const std::string &what)
      : Error("singular_covariance", what) {}
};

struct BasisTooLarge : Error {
  explicit BasisTooLarge(const std::string &what)
      : Error("basis_too_large", what) {}
};

struct DataError : Error {
  explicit DataError(const std::string &what) : Error("data", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string &what) : Error("config", what) {}
};

struct SamplingError : Error {
  explicit SamplingError(const std::string &what) : Error("sampling", what) {}
};

}  // namespace mdgp
