#pragma once

#include <stdexcept>
#include <string>

namespace psmrwm {

// Raised when a density is requested from a noise model that has none
// (point mass, two-point, empirical).
class NoDensityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual estimate " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// The maximiser of a scan sits on the edge of the search interval.
class BoundaryOptimumError : public std::runtime_error {
 public:
  BoundaryOptimumError(const std::string& what, double at)
      : std::runtime_error(what), at_(at) {}

  double at() const noexcept { return at_; }

 private:
  double at_;
};

class ChainAbort : public std::runtime_error {
 public:
  ChainAbort(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psmrwm
