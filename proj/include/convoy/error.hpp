#pragma once

#include <stdexcept>
#include <string>

namespace convoy {

enum class ErrorKind {
  SingularSpeed,
  Divergence,
  InsufficientData,
  Domain,
  ProjectionUndefined,
  EndOfPath,
  DegenerateDegree,
  GridMismatch,
  Schedule,
  Config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the integrator when any state component goes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(double time, const std::string& what)
      : Error(ErrorKind::Divergence, what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace convoy
