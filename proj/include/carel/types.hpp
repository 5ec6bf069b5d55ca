#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace carel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Invalid input to a numeric routine (dimension mismatch, empty batch, ...).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Bad configuration: unknown names, violated generator constraints, ...
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite value.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& component, const std::string& what)
      : std::runtime_error(what), component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

/// Malformed corpus / checkpoint / config file.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Self-training could not proceed.
class AdaptationError : public std::runtime_error {
 public:
  explicit AdaptationError(const std::string& what) : std::runtime_error(what) {}
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace carel
