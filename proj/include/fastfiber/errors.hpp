#pragma once

#include <stdexcept>
#include <string>

namespace fastfiber {

// Exit-code classes used by the CLI. Library code throws; only the CLI maps.
enum class ErrorKind {
  usage = 2,
  io = 3,
  geometry = 4,
  divergence = 5,
  numeric = 6,
  internal = 70,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& msg) : Error(ErrorKind::geometry, msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

struct ContrastError : Error {
  explicit ContrastError(const std::string& msg) : Error(ErrorKind::geometry, msg) {}
};

struct SingularityError : Error {
  explicit SingularityError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

// Thrown by the iterative schemes; carries the spectral-radius estimate that
// explains the failure.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, double rho_estimate)
      : Error(ErrorKind::divergence, msg), rho_(rho_estimate) {}
  double rho_estimate() const { return rho_; }

 private:
  double rho_;
};

struct StagnationError : Error {
  explicit StagnationError(const std::string& msg) : Error(ErrorKind::divergence, msg) {}
};

struct FactorizationError : Error {
  explicit FactorizationError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

}  // namespace fastfiber
