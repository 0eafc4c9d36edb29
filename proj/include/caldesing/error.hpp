#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace caldesing {

// Base for every domain failure raised by the library. Plain precondition
// violations (dimension mismatch, out-of-range parameters) use
// std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateFrameError : public Error {
 public:
  using Error::Error;
};

class NotSimpleError : public Error {
 public:
  using Error::Error;
};

class OutOfDomainError : public Error {
 public:
  OutOfDomainError(const std::string& what, double distance)
      : Error(what), distance_(distance) {}
  double distance() const noexcept { return distance_; }

 private:
  double distance_;
};

// Iterative solver gave up; the trace holds one residual per iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class SingularMetricError : public Error {
 public:
  using Error::Error;
};

// The tubular neighbourhood of the lifted sheet is too thin. Shrinking the
// amplitude of the vanishing function is the remedy.
class ReachError : public Error {
 public:
  ReachError(const std::string& what, double reach) : Error(what), reach_(reach) {}
  double reach() const noexcept { return reach_; }

 private:
  double reach_;
};

}  // namespace caldesing
