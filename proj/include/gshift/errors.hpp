#pragma once

#include <stdexcept>
#include <string>

namespace gshift {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (t < 0, alpha outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimensions disagree or a matrix is not square/symmetric.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be positive definite (or invertible) is not.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo run without enough accepted samples for a trustworthy estimate.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration. The message starts with the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gshift
