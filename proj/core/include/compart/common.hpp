#ifndef COMPART_COMMON_HPP
#define COMPART_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace compart {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base error. `module()` names the engine module that raised it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Malformed input: bad documents, bad expressions, bad paths, bad arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The numerics could not deliver: step underflow, singular systems, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace compart

#endif
