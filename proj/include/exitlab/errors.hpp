// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace exitlab {

/// Base for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: bad sizes, non-monotone times, empty sample sets.
class InputError : public Error
{
  public:
    using Error::Error;
};

/// Projection or boundary parametrization failed to converge.
class GeometryError : public Error
{
  public:
    using Error::Error;
};

/// Boundary normal undefined because the level-set gradient vanishes.
class BoundaryDegeneracyError : public GeometryError
{
  public:
    using GeometryError::GeometryError;
};

/// A frozen flow left the bounding box instead of reaching the r-ball.
class NonAttractionError : public Error
{
  public:
    using Error::Error;
};

/// Diffusion matrix not invertible.
class MatrixError : public Error
{
  public:
    using Error::Error;
};

/// M^{λ,k} - λ has no sign change on the grid.
class NoRootError : public Error
{
  public:
    using Error::Error;
};

/// M^{λ,k} - λ changes sign more than once on the grid.
class MultipleRootError : public Error
{
  public:
    using Error::Error;
};

/// Boundary minimum of the quasipotential is not attained at a single point.
class AmbiguousMinimizerError : public Error
{
  public:
    using Error::Error;
};

/// Iterative solver failed; carries the residual history.
class NumericError : public Error
{
  public:
    NumericError(std::string const& what, std::vector<double> history = {})
        : Error(what), history_(std::move(history))
    {
    }
    std::vector<double> const& history() const noexcept { return history_; }

  private:
    std::vector<double> history_;
};

/// File could not be read or written.
class IoError : public Error
{
  public:
    using Error::Error;
};

/// Trajectory exceeded its step budget before exit or censoring.
class BudgetError : public Error
{
  public:
    BudgetError(std::string const& what, std::uint64_t steps, double time, double lambda)
        : Error(what), steps_(steps), time_(time), lambda_(lambda)
    {
    }
    std::uint64_t steps() const noexcept { return steps_; }
    double time() const noexcept { return time_; }
    double lambda() const noexcept { return lambda_; }

  private:
    std::uint64_t steps_;
    double time_;
    double lambda_;
};

}  // namespace exitlab
