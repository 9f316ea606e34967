// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "exitlab/linalg.hpp"
#include "exitlab/model.hpp"

namespace exitlab {

/// Path with explicit process-time labels t_0 < ... < t_N.
struct TimedPath
{
    std::vector<double> times;
    std::vector<Vec> points;
};

/// Curve without time labels; interpreted through its arclength.
struct GeometricPath
{
    std::vector<Vec> points;
};

/*!
 * Midpoint-rule discretization of the frozen action functional
 *   ½ ∫ (φ' - b)ᵀ a⁻¹ (φ' - b) dt
 * with coefficients frozen at (λ, k).
 */
double action_of_path(ModelSpec const& model, TimedPath const& path, double lambda, int k);

/*!
 * Free-time (geometric) action ∫ (|y'|_a |b|_a - ⟨y', b⟩_a) ds with
 * ⟨u, v⟩_a = uᵀ a⁻¹ v, midpoint rule per segment.
 *
 * Requires at least 3 points and distinct consecutive points.
 */
double geometric_action(ModelSpec const& model, GeometricPath const& path, double lambda,
                        int k);

/// Gradient of geometric_action with respect to every path point.
std::vector<Vec> geometric_action_gradient(ModelSpec const& model, GeometricPath const& path,
                                           double lambda, int k);

/// Resample at n_points equally spaced arclength positions (endpoints kept).
GeometricPath reparametrize(GeometricPath const& path, int n_points);

/// (max - min) / mean of the chord lengths.
double chord_spread(GeometricPath const& path);

struct QuasipotentialOptions
{
    int n_points = 64;
    int max_iterations = 3000;
    double tolerance = 1e-11;  //!< relative decrease that counts as stalled
};

struct QuasipotentialResult
{
    double value = 0;
    GeometricPath path;
    int iterations = 0;
    double gradient_norm = 0;
    bool converged = false;
    bool left_bounding_box = false;  //!< path left the 1.5x inflated domain box
    std::vector<double> history;     //!< objective after every accepted step
};

/*!
 * Quasipotential V^{λ,k}(x): minimum of the geometric action over curves
 * from O to x.
 *
 * Starts from the straight segment and runs preconditioned descent on the
 * interior points with arclength reparametrization after every step. The
 * objective is nonincreasing along the history. Non-convergence returns the
 * best value with converged = false.
 */
QuasipotentialResult quasipotential(ModelSpec const& model, Vec const& x, double lambda,
                                    int k, QuasipotentialOptions const& options = {});

//---------------------------------------------------------------------------//

struct BoundaryCandidate
{
    double param = 0;
    Vec point;
    double value = 0;
};

struct BoundaryMinOptions
{
    int coarse_samples = 64;
    double param_tolerance = 1e-4;
    double tie_value_tolerance = 1e-3;
    double tie_distance = 0.05;
    int max_refined = 4;
    QuasipotentialOptions quasipotential;
};

struct BoundaryMinimum
{
    double value = 0;
    double param = 0;
    Vec point;
    bool ambiguous = false;  //!< competing minimizer far away on ∂D
    std::vector<BoundaryCandidate> candidates;
};

/// M^{λ,k} = min over ∂D of V^{λ,k}: coarse scan plus golden-section refinement.
BoundaryMinimum boundary_min(ModelSpec const& model, double lambda, int k,
                             BoundaryMinOptions const& options = {});

//---------------------------------------------------------------------------//

struct ProfilePoint
{
    double lambda = 0;
    double value = 0;  //!< M^{λ,k}
    double param = 0;
    Vec point;
    bool ambiguous = false;
};

struct RootOptions
{
    std::vector<double> lambda_grid;  //!< empty: 32 points on [0, Λ]
    double tolerance = 1e-4;
    BoundaryMinOptions boundary;
};

struct RootEntry
{
    int state = 0;
    double root = 0;        //!< m^k
    double value_at_root = 0;  //!< M^{m^k,k}
    double param = 0;
    Vec exit_point;         //!< x^k(m^k)
    bool ambiguous = false;
    std::vector<ProfilePoint> profile;
};

/*!
 * Root m^k of M^{λ,k} = λ. The grid must show exactly one sign change of
 * M - λ; zero changes raise NoRootError, several MultipleRootError.
 */
RootEntry solve_m(ModelSpec const& model, int k, RootOptions const& options = {});

struct ExitPointResult
{
    Vec point;
    double param = 0;
    double value = 0;
    std::vector<ProfilePoint> window;  //!< x^k(λ) around m^k
};

/// Unique minimizer x^k at λ = m^k; AmbiguousMinimizerError otherwise.
ExitPointResult exit_point(ModelSpec const& model, int k, RootEntry const& root,
                           BoundaryMinOptions const& options = {},
                           double window_halfwidth = 0.02, int window_points = 5);

ExitPointResult exit_point(ModelSpec const& model, int k, RootOptions const& options = {});

}  // namespace exitlab
