#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace softguide {

// Thrown when a grid is too coarse to resolve the potential it is asked to
// discretize (depth * h^2 too large, or a well narrower than a few spacings).
struct ResolutionError : std::runtime_error {
  explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative eigensolver ran out of iterations; carries the best residual
// norms reached so the caller can report how far off the run was.
struct NonConvergenceError : std::runtime_error {
  NonConvergenceError(const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), best_residuals(std::move(residuals)) {}
  std::vector<double> best_residuals;
};

// A root/onset bisection was handed a bracket whose endpoints do not
// straddle the feature being searched for.
struct BracketError : std::runtime_error {
  explicit BracketError(const std::string& what) : std::runtime_error(what) {}
};

// A count or threshold query could not be decided: the Dirichlet and
// Neumann truncations disagree by more than the allowed band.
struct InconclusiveError : std::runtime_error {
  InconclusiveError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), band_lo(lo), band_hi(hi) {}
  double band_lo;
  double band_hi;
};

// Masked-strip assembly selected no grid nodes.
struct EmptyDomainError : std::runtime_error {
  explicit EmptyDomainError(const std::string& what) : std::runtime_error(what) {}
};

// Config parsing/validation failure; message carries field-level detail.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem/serialization failure distinct from validation.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace softguide
