#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace elfuse {

enum class ErrorKind {
  validation,   // malformed or inconsistent input
  numerical,    // singular / ill-conditioned linear algebra
  convergence,  // iterative solver did not reach tolerance
  boundary,     // EL positivity region violated
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

/// Carries the last iterate so callers can inspect where the solver stopped.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                   double residual)
      : Error(ErrorKind::convergence, what),
        last_iterate_(std::move(last_iterate)),
        residual_(residual) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

class BoundaryError : public Error {
 public:
  BoundaryError(const std::string& what, Eigen::Index row)
      : Error(ErrorKind::boundary, what), row_(row) {}

  Eigen::Index row() const noexcept { return row_; }

 private:
  Eigen::Index row_;
};

}  // namespace elfuse
