// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/trap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "exitlab/errors.hpp"

namespace exitlab {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMinArm = 1e-3;

std::string fmt_residual(double r)
{
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << r;
    return os.str();
}

double wrap(double t)
{
    double const w = std::fmod(t, kTwoPi);
    return w < 0 ? w + kTwoPi : w;
}

}  // namespace

void TrapProblem::validate() const
{
    if (!inner || !outer || inner->dimension() != 2 || outer->dimension() != 2)
    {
        throw InputError("trap problem needs two-dimensional inner and outer domains");
    }
    if (!outer->parametric())
    {
        throw InputError("outer domain needs a boundary parametrization for γ");
    }
    for (auto const& p : inner->sample_boundary(256))
    {
        if (!(outer->level(p) < 0))
        {
            throw GeometryError("closure of the inner domain is not inside the outer domain");
        }
    }
    if (x_star.size() != 2 || std::abs(inner->level(x_star)) > 1e-10)
    {
        throw InputError("x* must lie on the inner boundary");
    }
    for (auto const& arc : gamma)
    {
        if (!(arc.end >= arc.begin))
        {
            throw InputError("γ arcs need begin <= end");
        }
    }
}

bool TrapProblem::in_gamma(double param) const
{
    double const t = wrap(param);
    for (auto const& arc : gamma)
    {
        if (arc.end - arc.begin >= kTwoPi)
        {
            return true;
        }
        double const a = wrap(arc.begin);
        double const length = arc.end - arc.begin;
        double offset = t - a;
        if (offset < 0)
        {
            offset += kTwoPi;
        }
        if (offset < length)
        {
            return true;
        }
    }
    return false;
}

TrapProblem TrapProblem::complement() const
{
    TrapProblem out = *this;
    out.gamma.clear();
    // Sorted, merged arcs on [0, 2π) and their gaps.
    std::vector<std::pair<double, double>> arcs;
    for (auto const& arc : gamma)
    {
        double const length = arc.end - arc.begin;
        if (length >= kTwoPi)
        {
            return out;
        }
        if (length <= 0)
        {
            continue;
        }
        double const a = wrap(arc.begin);
        if (a + length <= kTwoPi)
        {
            arcs.emplace_back(a, a + length);
        }
        else
        {
            arcs.emplace_back(a, kTwoPi);
            arcs.emplace_back(0.0, a + length - kTwoPi);
        }
    }
    std::sort(arcs.begin(), arcs.end());
    double cursor = 0;
    for (auto const& [a, b] : arcs)
    {
        if (a > cursor)
        {
            out.gamma.push_back({cursor, a});
        }
        cursor = std::max(cursor, b);
    }
    if (cursor < kTwoPi)
    {
        out.gamma.push_back({cursor, kTwoPi});
    }
    return out;
}

//---------------------------------------------------------------------------//

Vec GridFunction::node(int i, int j) const
{
    return make_vec({x0 + h * i, y0 + h * j});
}

double GridFunction::interpolate(Vec const& x) const
{
    double const fx = (x[0] - x0) / h;
    double const fy = (x[1] - y0) / h;
    int const ix = static_cast<int>(std::floor(fx));
    int const iy = static_cast<int>(std::floor(fy));

    auto valid = [&](int i, int j) {
        return i >= 0 && j >= 0 && i <= n && j <= n && !std::isnan(at(i, j));
    };
    bool cubic = true;
    for (int a = -1; a <= 2 && cubic; ++a)
    {
        for (int b = -1; b <= 2 && cubic; ++b)
        {
            cubic = valid(ix + a, iy + b);
        }
    }
    double const tx = fx - ix;
    double const ty = fy - iy;
    if (cubic)
    {
        auto weights = [](double t, double w[4]) {
            // Lagrange basis on nodes -1, 0, 1, 2.
            w[0] = -t * (t - 1) * (t - 2) / 6;
            w[1] = (t + 1) * (t - 1) * (t - 2) / 2;
            w[2] = -(t + 1) * t * (t - 2) / 2;
            w[3] = (t + 1) * t * (t - 1) / 6;
        };
        double wx[4];
        double wy[4];
        weights(tx, wx);
        weights(ty, wy);
        double sum = 0;
        for (int a = 0; a < 4; ++a)
        {
            for (int b = 0; b < 4; ++b)
            {
                sum += wx[a] * wy[b] * at(ix + a - 1, iy + b - 1);
            }
        }
        return sum;
    }
    if (valid(ix, iy) && valid(ix + 1, iy) && valid(ix, iy + 1) && valid(ix + 1, iy + 1))
    {
        return (1 - tx) * (1 - ty) * at(ix, iy) + tx * (1 - ty) * at(ix + 1, iy)
               + (1 - tx) * ty * at(ix, iy + 1) + tx * ty * at(ix + 1, iy + 1);
    }
    // Last resort near the outer boundary: nearest valid node.
    double best = kNaN;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int a = -1; a <= 2; ++a)
    {
        for (int b = -1; b <= 2; ++b)
        {
            if (valid(ix + a, iy + b))
            {
                double const dist = (node(ix + a, iy + b) - x).norm();
                if (dist < best_dist)
                {
                    best_dist = dist;
                    best = at(ix + a, iy + b);
                }
            }
        }
    }
    return best;
}

namespace {

enum class NodeKind : unsigned char
{
    unknown,
    inner_region,   //!< in D̄
    outer_region,   //!< outside D₁
    outer_boundary  //!< exactly on ∂D₁
};

/// Fraction θ ∈ (0, 1] along p → q where g first vanishes (g(p) < 0 ≤ g(q)).
double crossing(std::function<double(Vec const&)> const& g, Vec const& p, Vec const& q)
{
    double lo = 0;
    double hi = 1;
    double g_lo = g(p);
    double g_hi = g(q);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it)
    {
        // Regula falsi with bisection safeguard.
        double t = lo + (hi - lo) * (g_lo / (g_lo - g_hi));
        if (!(t > lo + 0.01 * (hi - lo) && t < hi - 0.01 * (hi - lo)))
        {
            t = 0.5 * (lo + hi);
        }
        double const gt = g(p + t * (q - p));
        if (gt >= 0)
        {
            hi = t;
            g_hi = gt;
        }
        else
        {
            lo = t;
            g_lo = gt;
        }
        if (gt == 0)
        {
            break;
        }
    }
    return hi;
}

}  // namespace

GridFunction solve_dirichlet_annulus(Domain const& inner, Domain const& outer,
                                     double inner_value, BoundaryData const& outer_data,
                                     int resolution, double tolerance)
{
    if (resolution < 64)
    {
        throw InputError("grid resolution must be at least 64");
    }
    if (inner.dimension() != 2 || outer.dimension() != 2)
    {
        throw InputError("annulus solver is two-dimensional");
    }
    GridFunction f;
    Vec const lo = outer.lower_corner();
    Vec const hi = outer.upper_corner();
    double const span = std::max(hi[0] - lo[0], hi[1] - lo[1]);
    f.n = resolution;
    f.h = span / resolution;
    Vec const centre = 0.5 * (lo + hi);
    f.x0 = centre[0] - 0.5 * span;
    f.y0 = centre[1] - 0.5 * span;
    int const m = f.n + 1;
    auto idx = [m](int i, int j) { return static_cast<std::size_t>(j) * m + i; };

    std::vector<NodeKind> kind(static_cast<std::size_t>(m) * m);
    f.values.assign(kind.size(), kNaN);
    f.unknown.assign(kind.size(), 0);
    std::vector<int> unknown_index(kind.size(), -1);
    int n_unknown = 0;
    for (int j = 0; j < m; ++j)
    {
        for (int i = 0; i < m; ++i)
        {
            Vec const p = f.node(i, j);
            double const go = outer.level(p);
            double const gi = inner.level(p);
            NodeKind k;
            if (go > 0)
            {
                k = NodeKind::outer_region;
            }
            else if (go == 0)
            {
                k = NodeKind::outer_boundary;
                f.values[idx(i, j)] = outer_data(p, outer.param_of(p));
            }
            else if (gi <= 0)
            {
                k = NodeKind::inner_region;
                f.values[idx(i, j)] = inner_value;
            }
            else
            {
                k = NodeKind::unknown;
                unknown_index[idx(i, j)] = n_unknown++;
                f.unknown[idx(i, j)] = 1;
            }
            kind[idx(i, j)] = k;
        }
    }

    auto inner_g = [&](Vec const& x) { return -inner.level(x); };  // ≥ 0 inside D
    auto outer_g = [&](Vec const& x) { return outer.level(x); };

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n_unknown) * 5);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    // Stencil rows scaled by h² so that interior rows read 4u - Σu_nb = 0.
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(n_unknown));
    std::vector<double> diag(static_cast<std::size_t>(n_unknown), 0.0);
    std::vector<double> row_rhs(static_cast<std::size_t>(n_unknown), 0.0);
    std::vector<std::pair<int, double>> pinned;

    int const di[4] = {1, -1, 0, 0};
    int const dj[4] = {0, 0, 1, -1};
    for (int j = 0; j < m; ++j)
    {
        for (int i = 0; i < m; ++i)
        {
            int const row = unknown_index[idx(i, j)];
            if (row < 0)
            {
                continue;
            }
            Vec const p = f.node(i, j);
            // Arm lengths (in units of h) and neighbour data per direction.
            double arm[4];
            int nb_col[4];
            double nb_val[4];
            for (int dir = 0; dir < 4; ++dir)
            {
                int const ni = i + di[dir];
                int const nj = j + dj[dir];
                nb_col[dir] = -1;
                nb_val[dir] = 0;
                arm[dir] = 1.0;
                NodeKind const nk = (ni < 0 || nj < 0 || ni >= m || nj >= m)
                                        ? NodeKind::outer_region
                                        : kind[idx(ni, nj)];
                Vec const q = p + f.h * make_vec({static_cast<double>(di[dir]),
                                                  static_cast<double>(dj[dir])});
                if (nk == NodeKind::unknown)
                {
                    nb_col[dir] = unknown_index[idx(ni, nj)];
                    continue;
                }
                if (nk == NodeKind::outer_boundary)
                {
                    nb_val[dir] = f.values[idx(ni, nj)];
                    continue;
                }
                double theta_outer = 2.0;
                double theta_inner = 2.0;
                if (outer_g(q) >= 0)
                {
                    theta_outer = crossing(outer_g, p, q);
                }
                if (inner_g(q) >= 0)
                {
                    theta_inner = crossing(inner_g, p, q);
                }
                if (theta_inner <= theta_outer)
                {
                    arm[dir] = theta_inner;
                    nb_val[dir] = inner_value;
                }
                else
                {
                    arm[dir] = theta_outer;
                    Vec const xc = p + theta_outer * (q - p);
                    nb_val[dir] = outer_data(xc, outer.param_of(xc));
                }
            }
            // A node within 1e-3 h of the boundary is pinned to the nearby
            // boundary value; keeping it would put O(1/θ) weights in the row
            // and the residual could not go below rounding.
            int nearest = -1;
            for (int dir = 0; dir < 4; ++dir)
            {
                if (nb_col[dir] < 0 && arm[dir] < kMinArm
                    && (nearest < 0 || arm[dir] < arm[nearest]))
                {
                    nearest = dir;
                }
            }
            if (nearest >= 0)
            {
                pinned.emplace_back(row, nb_val[nearest]);
                continue;
            }
            // Shortley-Weller: u_xx ≈ 2/(a_l+a_r)[(u_r-u)/a_r - (u-u_l)/a_l] / h².
            auto& r = rows[static_cast<std::size_t>(row)];
            double d = 0;
            double b = 0;
            for (int axis = 0; axis < 2; ++axis)
            {
                int const plus = 2 * axis;
                int const minus = 2 * axis + 1;
                double const ap = arm[plus];
                double const am = arm[minus];
                double const wp = 2.0 / (ap * (ap + am));
                double const wm = 2.0 / (am * (ap + am));
                d += wp + wm;
                for (auto [dir, w] : {std::pair{plus, wp}, std::pair{minus, wm}})
                {
                    if (nb_col[dir] >= 0)
                    {
                        r.emplace_back(nb_col[dir], -w);
                    }
                    else
                    {
                        b += w * nb_val[dir];
                    }
                }
            }
            diag[static_cast<std::size_t>(row)] = d;
            row_rhs[static_cast<std::size_t>(row)] = b;
        }
    }
    for (auto const& [row, value] : pinned)
    {
        diag[static_cast<std::size_t>(row)] = 4.0;
        row_rhs[static_cast<std::size_t>(row)] = 4.0 * value;
    }
    for (int row = 0; row < n_unknown; ++row)
    {
        triplets.emplace_back(row, row, diag[static_cast<std::size_t>(row)]);
        for (auto const& [col, w] : rows[static_cast<std::size_t>(row)])
        {
            triplets.emplace_back(row, col, w);
        }
        rhs[row] = row_rhs[static_cast<std::size_t>(row)];
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(n_unknown, n_unknown);
    a.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::VectorXd solution = Eigen::VectorXd::Zero(n_unknown);
    if (n_unknown > 0)
    {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>,
                        Eigen::DiagonalPreconditioner<double>>
            solver;
        // Relative 2-norm target that implies max|Δ_h u| <= tolerance.
        double const rhs_norm = std::max(rhs.norm(), 1e-300);
        solver.setTolerance(std::max(tolerance * f.h * f.h / rhs_norm, 1e-16));
        solver.setMaxIterations(20 * n_unknown);
        solver.compute(a);
        // Warm start from the mean boundary value speeds up the constant cases.
        Eigen::VectorXd guess = Eigen::VectorXd::Constant(n_unknown, inner_value);
        std::vector<double> history;
        double res = std::numeric_limits<double>::infinity();
        // BiCGSTAB can stall short of the requested tolerance; restart from
        // the current iterate a few times before giving up.
        for (int attempt = 0; attempt < 4 && !(res <= tolerance); ++attempt)
        {
            solution = solver.solveWithGuess(rhs, attempt == 0 ? guess : solution);
            f.iterations += static_cast<int>(solver.iterations());
            // Scaled residual max|Δ_h u| = max|A u - b| / h².
            res = (a * solution - rhs).cwiseAbs().maxCoeff() / (f.h * f.h);
            history.push_back(res);
        }
        f.residual = res;
        if (!std::isfinite(res) || res > 1e-8)
        {
            throw NumericError("Laplace solve did not converge (residual "
                                   + fmt_residual(res) + ")",
                               history);
        }
    }
    for (int j = 0; j < m; ++j)
    {
        for (int i = 0; i < m; ++i)
        {
            int const row = unknown_index[idx(i, j)];
            if (row >= 0)
            {
                f.values[idx(i, j)] = solution[row];
            }
        }
    }
    return f;
}

double normal_derivative(GridFunction const& f, Domain const& inner, Vec const& x,
                         double boundary_value)
{
    Vec const n = inner.normal(x);
    double const s = 3.0 * f.h;
    double const v1 = f.interpolate(x + s * n);
    double const v2 = f.interpolate(x + 2.0 * s * n);
    return (-3.0 * boundary_value + 4.0 * v1 - v2) / (2.0 * s);
}

TrapSolution solve_trap(TrapProblem const& problem, int resolution)
{
    problem.validate();
    // Jump points of the indicator get the mean of both sides; otherwise the
    // one node sitting on an arc endpoint biases c by O(h).
    auto gamma_data = [&](Vec const&, double param) {
        double const left = problem.in_gamma(param - 1e-9) ? 1.0 : 0.0;
        double const right = problem.in_gamma(param + 1e-9) ? 1.0 : 0.0;
        return 0.5 * (left + right);
    };
    auto zero = [](Vec const&, double) { return 0.0; };
    auto const v0
        = solve_dirichlet_annulus(*problem.inner, *problem.outer, 0.0, gamma_data, resolution);
    auto const v1 = solve_dirichlet_annulus(*problem.inner, *problem.outer, 1.0, zero, resolution);

    TrapSolution out;
    out.normal_derivative_v0 = normal_derivative(v0, *problem.inner, problem.x_star, 0.0);
    out.normal_derivative_v1 = normal_derivative(v1, *problem.inner, problem.x_star, 1.0);
    if (std::abs(out.normal_derivative_v1) < 1e-10)
    {
        throw NumericError("normal derivative of the inner-unit solution vanishes at x*");
    }
    out.c = -out.normal_derivative_v0 / out.normal_derivative_v1;
    out.u = v0;
    for (std::size_t i = 0; i < out.u.values.size(); ++i)
    {
        out.u.values[i] = v0.values[i] + out.c * v1.values[i];
    }
    out.u.residual = std::max(v0.residual, std::abs(out.c) * v1.residual);
    out.u.iterations = v0.iterations + v1.iterations;
    out.residual = out.u.residual;
    out.normal_derivative_at_xstar
        = normal_derivative(out.u, *problem.inner, problem.x_star, out.c);
    return out;
}

double exit_law_through_outer(TrapProblem const& problem, TrapSolution const& solution,
                              Vec const& x)
{
    if (x.size() != 2)
    {
        throw InputError("point must be two-dimensional");
    }
    double const go = problem.outer->level(x);
    if (go > 1e-10)
    {
        throw InputError("point lies outside the outer domain");
    }
    if (std::abs(go) <= 1e-10)
    {
        return problem.in_gamma(problem.outer->param_of(x)) ? 1.0 : 0.0;
    }
    if (problem.inner->level(x) <= 0)
    {
        return solution.c;
    }
    return std::clamp(solution.u.interpolate(x), 0.0, 1.0);
}

double annulus_half_oracle(Vec const& x, int terms)
{
    double const r = x.norm();
    double const theta = std::atan2(x[1], x[0]);
    double sum = 0.5;
    for (int n = 1; n <= terms; n += 2)
    {
        // (r^n - r^-n)/(2^n - 2^-n) = (r/2)^n (1 - r^-2n)/(1 - 2^-2n)
        double const ratio = std::pow(r / 2.0, n) * (1.0 - std::pow(r, -2.0 * n))
                             / (1.0 - std::pow(2.0, -2.0 * n));
        sum += 2.0 / (n * std::numbers::pi) * std::sin(n * theta) * ratio;
    }
    return sum;
}

}  // namespace exitlab
