// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "exitlab/model.hpp"

namespace exitlab {

/// Arc [begin, end) in the boundary parameter of the outer domain.
struct ParamArc
{
    double begin = 0;
    double end = 0;
};

/*!
 * Inner domain D inside outer domain D₁ (both 2D), the target set γ ⊆ ∂D₁
 * and a distinguished point x* on ∂D.
 */
struct TrapProblem
{
    DomainPtr inner;
    DomainPtr outer;
    std::vector<ParamArc> gamma;
    Vec x_star;

    /// Throws GeometryError / InputError on violated containment or x* ∉ ∂D.
    void validate() const;
    /// Indicator of γ at an outer boundary parameter (left-closed arcs).
    bool in_gamma(double param) const;
    /// Complementary arc set ∂D₁ \ γ.
    TrapProblem complement() const;
};

/// Cell-centred-free nodal grid on the outer bounding box.
struct GridFunction
{
    double x0 = 0;
    double y0 = 0;
    double h = 0;
    int n = 0;  //!< cells per dimension; (n+1)² nodes
    std::vector<double> values;   //!< NaN outside D̄₁
    std::vector<unsigned char> unknown;  //!< 1 where the Laplace equation is solved
    double residual = 0;          //!< max |Δ_h u| over unknown nodes
    int iterations = 0;

    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * (n + 1) + i]; }
    Vec node(int i, int j) const;
    /// Cubic Lagrange interpolation on a 4x4 stencil (bilinear fallback near edges).
    double interpolate(Vec const& x) const;
};

using BoundaryData = std::function<double(Vec const& point, double param)>;

/*!
 * Shortley-Weller finite differences for Δu = 0 in D₁ \ D̄ with u = inner on
 * ∂D and u = outer(x) on ∂D₁; boundary crossings are located on each grid
 * edge. Solved by BiCGSTAB with Jacobi preconditioning until
 * max|Δ_h u| <= tolerance; throws NumericError above 1e-8.
 */
GridFunction solve_dirichlet_annulus(Domain const& inner, Domain const& outer,
                                     double inner_value, BoundaryData const& outer_data,
                                     int resolution, double tolerance = 1e-10);

struct TrapSolution
{
    GridFunction u;
    double c = 0;                       //!< u on ∂D, equal to u(x*)
    double normal_derivative_v0 = 0;
    double normal_derivative_v1 = 0;
    double normal_derivative_at_xstar = 0;  //!< re-measured on the assembled u
    double residual = 0;
};

/// One-sided second-order normal derivative of a grid function at x ∈ ∂D.
double normal_derivative(GridFunction const& f, Domain const& inner, Vec const& x,
                         double boundary_value);

TrapSolution solve_trap(TrapProblem const& problem, int resolution = 256);

/// lim P(X exits D₁ through γ) for a start at x.
double exit_law_through_outer(TrapProblem const& problem, TrapSolution const& solution,
                              Vec const& x);

/// Series solution on concentric disks of radii 1 and 2 with γ the upper half.
double annulus_half_oracle(Vec const& x, int terms = 4001);

}  // namespace exitlab
