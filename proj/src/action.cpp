// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "exitlab/errors.hpp"
#include "exitlab/golden.hpp"
#include "exitlab/parallel.hpp"

namespace exitlab {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// a⁻¹ evaluator that skips re-inversion for x-independent diffusion.
class InverseDiffusion
{
  public:
    InverseDiffusion(ModelSpec const& model, double lambda, int k, Vec const& any_point)
        : model_(model), lambda_(lambda), k_(k)
    {
        constant_ = model.coefficients[static_cast<std::size_t>(k)].sigma_constant_in_x;
        if (constant_)
        {
            cached_ = model.diffusion_inverse(any_point, lambda, k);
        }
    }

    bool constant() const { return constant_; }

    Mat operator()(Vec const& x) const
    {
        return constant_ ? cached_ : model_.diffusion_inverse(x, lambda_, k_);
    }

  private:
    ModelSpec const& model_;
    double lambda_;
    int k_;
    bool constant_ = false;
    Mat cached_;
};

double a_norm(Vec const& v, Mat const& w)
{
    return std::sqrt(std::max(0.0, v.dot(w * v)));
}

void require_geometric(GeometricPath const& path)
{
    if (path.points.size() < 3)
    {
        throw InputError("geometric path needs at least 3 points");
    }
    for (std::size_t i = 0; i + 1 < path.points.size(); ++i)
    {
        if ((path.points[i + 1] - path.points[i]).norm() == 0)
        {
            throw InputError("geometric path has coincident consecutive points");
        }
    }
}

double segment_cost(Vec const& delta, Vec const& drift, Mat const& w)
{
    return a_norm(delta, w) * a_norm(drift, w) - delta.dot(w * drift);
}

}  // namespace

double action_of_path(ModelSpec const& model, TimedPath const& path, double lambda, int k)
{
    auto const n = path.points.size();
    if (n < 2 || path.times.size() != n)
    {
        throw InputError("timed path needs matching times and at least 2 points");
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        if (!(path.times[i + 1] > path.times[i]))
        {
            throw InputError("timed path times must be strictly increasing");
        }
    }
    InverseDiffusion const inv(model, lambda, k, path.points.front());
    double total = 0;
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        double const dt = path.times[i + 1] - path.times[i];
        Vec const mid = 0.5 * (path.points[i] + path.points[i + 1]);
        Vec const velocity = (path.points[i + 1] - path.points[i]) / dt;
        Vec const residual = velocity - model.drift(mid, lambda, k);
        total += 0.5 * dt * residual.dot(inv(mid) * residual);
    }
    return std::max(0.0, total);
}

double geometric_action(ModelSpec const& model, GeometricPath const& path, double lambda,
                        int k)
{
    require_geometric(path);
    InverseDiffusion const inv(model, lambda, k, path.points.front());
    double total = 0;
    for (std::size_t i = 0; i + 1 < path.points.size(); ++i)
    {
        Vec const mid = 0.5 * (path.points[i] + path.points[i + 1]);
        total += segment_cost(path.points[i + 1] - path.points[i],
                              model.drift(mid, lambda, k), inv(mid));
    }
    return std::max(0.0, total);
}

std::vector<Vec> geometric_action_gradient(ModelSpec const& model, GeometricPath const& path,
                                           double lambda, int k)
{
    require_geometric(path);
    auto const n = path.points.size();
    int const d = static_cast<int>(path.points.front().size());
    InverseDiffusion const inv(model, lambda, k, path.points.front());
    std::vector<Vec> grad(n, Vec::Zero(d));
    constexpr double kTiny = 1e-300;

    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        Vec const delta = path.points[i + 1] - path.points[i];
        Vec const mid = 0.5 * (path.points[i] + path.points[i + 1]);
        Vec const beta = model.drift(mid, lambda, k);
        Mat const w = inv(mid);
        double const n_delta = std::max(a_norm(delta, w), kTiny);
        double const n_beta = a_norm(beta, w);

        Vec const w_delta = w * delta;
        Vec const w_beta = w * beta;
        Vec const d_delta = (n_beta / n_delta) * w_delta - w_beta;
        // |β|_a is not differentiable at β = 0; use the zero subgradient there.
        Vec d_beta = -w_delta;
        if (n_beta > kTiny)
        {
            d_beta += (n_delta / n_beta) * w_beta;
        }
        Vec d_mid = model.drift_jacobian(mid, lambda, k).transpose() * d_beta;
        if (!inv.constant())
        {
            for (int r = 0; r < d; ++r)
            {
                double const h = 1e-6 * std::max(1.0, std::abs(mid[r]));
                Vec plus = mid;
                Vec minus = mid;
                plus[r] += h;
                minus[r] -= h;
                Mat const dw = (inv(plus) - inv(minus)) / (2 * h);
                double term = -delta.dot(dw * beta);
                term += 0.5 * (n_beta / n_delta) * delta.dot(dw * delta);
                if (n_beta > kTiny)
                {
                    term += 0.5 * (n_delta / n_beta) * beta.dot(dw * beta);
                }
                d_mid[r] += term;
            }
        }
        grad[i] += -d_delta + 0.5 * d_mid;
        grad[i + 1] += d_delta + 0.5 * d_mid;
    }
    return grad;
}

GeometricPath reparametrize(GeometricPath const& path, int n_points)
{
    auto const& pts = path.points;
    std::vector<double> cumulative(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
    {
        cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    double const length = cumulative.back();
    GeometricPath out;
    out.points.reserve(static_cast<std::size_t>(n_points));
    out.points.push_back(pts.front());
    std::size_t seg = 0;
    for (int j = 1; j + 1 < n_points; ++j)
    {
        double const target = length * j / (n_points - 1);
        while (seg + 2 < pts.size() && cumulative[seg + 1] < target)
        {
            ++seg;
        }
        double const span = cumulative[seg + 1] - cumulative[seg];
        double const t = span > 0 ? (target - cumulative[seg]) / span : 0.0;
        out.points.push_back(pts[seg] + t * (pts[seg + 1] - pts[seg]));
    }
    out.points.push_back(pts.back());
    return out;
}

double chord_spread(GeometricPath const& path)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    double sum = 0;
    for (std::size_t i = 0; i + 1 < path.points.size(); ++i)
    {
        double const len = (path.points[i + 1] - path.points[i]).norm();
        lo = std::min(lo, len);
        hi = std::max(hi, len);
        sum += len;
    }
    double const mean = sum / static_cast<double>(path.points.size() - 1);
    return mean > 0 ? (hi - lo) / mean : 0.0;
}

namespace {

/// Solve tridiag(-1, 2, -1) p = rhs for each coordinate (Dirichlet ends).
std::vector<Vec> laplacian_solve(std::vector<Vec> const& rhs)
{
    auto const m = rhs.size();
    std::vector<Vec> out(rhs);
    if (m == 0)
    {
        return out;
    }
    std::vector<double> c_prime(m);
    std::vector<Vec> d_prime(m);
    c_prime[0] = -0.5;
    d_prime[0] = rhs[0] / 2.0;
    for (std::size_t i = 1; i < m; ++i)
    {
        double const denom = 2.0 + c_prime[i - 1];
        c_prime[i] = -1.0 / denom;
        d_prime[i] = (rhs[i] + d_prime[i - 1]) / denom;
    }
    out[m - 1] = d_prime[m - 1];
    for (std::size_t i = m - 1; i-- > 0;)
    {
        out[i] = d_prime[i] - c_prime[i] * out[i + 1];
    }
    return out;
}

/// Remove the component along the local tangent at each interior point.
void project_normal(std::vector<Vec>& v, GeometricPath const& path)
{
    for (std::size_t j = 0; j < v.size(); ++j)
    {
        Vec tangent = path.points[j + 2] - path.points[j];
        double const norm = tangent.norm();
        if (norm > 0)
        {
            tangent /= norm;
            v[j] -= v[j].dot(tangent) * tangent;
        }
    }
}

bool outside_box(ModelSpec const& model, GeometricPath const& path)
{
    Vec const lo = model.domain->lower_corner();
    Vec const hi = model.domain->upper_corner();
    Vec const mid = 0.5 * (lo + hi);
    Vec const half = 0.75 * (hi - lo);
    for (auto const& p : path.points)
    {
        if (((p - mid).cwiseAbs() - half).maxCoeff() > 0)
        {
            return true;
        }
    }
    return false;
}

}  // namespace

QuasipotentialResult quasipotential(ModelSpec const& model, Vec const& x, double lambda,
                                    int k, QuasipotentialOptions const& options)
{
    if (options.n_points < 16)
    {
        throw InputError("quasipotential needs n_points >= 16");
    }
    if (x.size() != model.dimension)
    {
        throw InputError("endpoint has the wrong dimension");
    }
    Vec const& origin = model.equilibrium;
    QuasipotentialResult result;
    if ((x - origin).norm() <= 1e-14)
    {
        result.path.points = {origin};
        result.converged = true;
        result.history = {0.0};
        return result;
    }

    int const n = options.n_points;
    GeometricPath path;
    for (int i = 0; i < n; ++i)
    {
        double const t = static_cast<double>(i) / (n - 1);
        path.points.push_back(origin + t * (x - origin));
    }
    double value = geometric_action(model, path, lambda, k);
    result.history.push_back(value);

    double const ds = (x - origin).norm() / (n - 1);
    double step = 1.0;
    int stalled = 0;
    bool converged = false;
    double gnorm = 0;
    int it = 0;
    for (; it < options.max_iterations; ++it)
    {
        auto grad = geometric_action_gradient(model, path, lambda, k);
        std::vector<Vec> interior(grad.begin() + 1, grad.end() - 1);
        project_normal(interior, path);
        gnorm = 0;
        for (auto const& g : interior)
        {
            gnorm += g.squaredNorm();
        }
        gnorm = std::sqrt(gnorm);
        if (gnorm <= 1e-13 * std::max(1.0, value))
        {
            converged = true;
            break;
        }

        // Sobolev-type direction: the transverse Hessian of the discrete
        // action behaves like a scaled path Laplacian.
        double drift_scale = 0;
        for (std::size_t i = 0; i + 1 < path.points.size(); ++i)
        {
            drift_scale += model.drift(0.5 * (path.points[i] + path.points[i + 1]), lambda, k)
                               .norm();
        }
        drift_scale = std::max(drift_scale / (n - 1), 1e-12);
        auto direction = laplacian_solve(interior);
        project_normal(direction, path);
        double slope = 0;
        for (std::size_t j = 0; j < direction.size(); ++j)
        {
            direction[j] *= ds / drift_scale;
            slope += direction[j].dot(interior[j]);
        }
        if (!(slope > 0))
        {
            converged = true;
            break;
        }

        bool accepted = false;
        step = std::min(step * 2.0, 1e6);
        GeometricPath trial;
        double trial_value = value;
        while (step > 1e-14)
        {
            trial.points = path.points;
            for (std::size_t j = 0; j < direction.size(); ++j)
            {
                trial.points[j + 1] -= step * direction[j];
            }
            trial = reparametrize(trial, n);
            try
            {
                trial_value = geometric_action(model, trial, lambda, k);
            }
            catch (InputError const&)
            {
                trial_value = std::numeric_limits<double>::infinity();
            }
            if (trial_value <= value - 1e-4 * step * slope)
            {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
        {
            // Stalled at rounding level; the current path is the discrete minimizer.
            converged = gnorm <= 1e-6 * std::max(1.0, value);
            break;
        }
        double const decrease = value - trial_value;
        path = std::move(trial);
        value = trial_value;
        result.history.push_back(value);
        if (decrease <= options.tolerance * std::max(value, 1e-3))
        {
            if (++stalled >= 3)
            {
                converged = true;
                ++it;
                break;
            }
        }
        else
        {
            stalled = 0;
        }
    }

    result.value = value;
    result.path = std::move(path);
    result.iterations = it;
    result.gradient_norm = gnorm;
    result.converged = converged;
    result.left_bounding_box = outside_box(model, result.path);
    return result;
}

//---------------------------------------------------------------------------//
// Boundary minimum
//---------------------------------------------------------------------------//
namespace {

double wrap_angle(double angle)
{
    double const wrapped = std::fmod(angle, kTwoPi);
    return wrapped < 0 ? wrapped + kTwoPi : wrapped;
}

/// Compass search in the tangent plane of a non-parametric boundary.
BoundaryCandidate refine_projected(ModelSpec const& model, BoundaryCandidate start,
                                   double initial_step, double tol,
                                   std::function<double(Vec const&)> const& value_at)
{
    BoundaryCandidate best = start;
    double step = initial_step;
    int const d = model.dimension;
    while (step > tol)
    {
        Vec const normal = model.domain->normal(best.point);
        // Orthonormal tangent basis by Gram-Schmidt on the coordinate axes.
        std::vector<Vec> basis;
        for (int a = 0; a < d && static_cast<int>(basis.size()) < d - 1; ++a)
        {
            Vec e = Vec::Zero(d);
            e[a] = 1;
            e -= e.dot(normal) * normal;
            for (auto const& b : basis)
            {
                e -= e.dot(b) * b;
            }
            if (e.norm() > 1e-6)
            {
                basis.push_back(e.normalized());
            }
        }
        bool improved = false;
        for (auto const& t : basis)
        {
            for (double sign : {1.0, -1.0})
            {
                Vec const p = model.domain->project(best.point + sign * step * t);
                double const v = value_at(p);
                if (v < best.value)
                {
                    best = {0, p, v};
                    improved = true;
                }
            }
        }
        if (!improved)
        {
            step *= 0.5;
        }
    }
    return best;
}

}  // namespace

BoundaryMinimum boundary_min(ModelSpec const& model, double lambda, int k,
                             BoundaryMinOptions const& options)
{
    auto const& domain = *model.domain;
    int const n = options.coarse_samples;
    if (n < 3)
    {
        throw InputError("boundary_min needs at least 3 coarse samples");
    }
    auto value_at = [&](Vec const& p) {
        return quasipotential(model, p, lambda, k, options.quasipotential).value;
    };

    std::vector<Vec> points;
    std::vector<double> params(static_cast<std::size_t>(n), 0.0);
    if (domain.parametric())
    {
        for (int i = 0; i < n; ++i)
        {
            params[static_cast<std::size_t>(i)] = kTwoPi * i / n;
            points.push_back(domain.point_at(params[static_cast<std::size_t>(i)]));
        }
    }
    else
    {
        points = domain.sample_boundary(n);
    }
    std::vector<double> values(points.size());
    parallel_for(points.size(), [&](std::size_t i) { values[i] = value_at(points[i]); });

    double const coarse_min = *std::min_element(values.begin(), values.end());
    double const coarse_max = *std::max_element(values.begin(), values.end());

    // Local minima of the coarse scan (cyclic for parametric boundaries).
    std::vector<std::size_t> minima;
    if (domain.parametric())
    {
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            double const prev = values[(i + values.size() - 1) % values.size()];
            double const next = values[(i + 1) % values.size()];
            if (values[i] <= prev && values[i] <= next)
            {
                minima.push_back(i);
            }
        }
    }
    else
    {
        // Neighborhood minima among the nearest samples.
        for (std::size_t i = 0; i < points.size(); ++i)
        {
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t j = 0; j < points.size(); ++j)
            {
                if (j != i)
                {
                    dist.emplace_back((points[j] - points[i]).norm(), j);
                }
            }
            std::sort(dist.begin(), dist.end());
            bool is_min = true;
            for (std::size_t q = 0; q < std::min<std::size_t>(6, dist.size()); ++q)
            {
                is_min = is_min && values[i] <= values[dist[q].second];
            }
            if (is_min)
            {
                minima.push_back(i);
            }
        }
    }
    std::sort(minima.begin(), minima.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (static_cast<int>(minima.size()) > options.max_refined)
    {
        minima.resize(static_cast<std::size_t>(options.max_refined));
    }

    BoundaryMinimum result;
    double const step = kTwoPi / n;
    for (std::size_t idx : minima)
    {
        BoundaryCandidate cand;
        if (domain.parametric())
        {
            double const centre = params[idx];
            auto const refined = golden_section_minimize(
                [&](double t) { return value_at(domain.point_at(t)); }, centre - step,
                centre + step, options.param_tolerance);
            cand.param = wrap_angle(refined.argmin);
            cand.point = domain.point_at(cand.param);
            cand.value = refined.value;
            if (values[idx] < cand.value)
            {
                cand = {params[idx], points[idx], values[idx]};
            }
        }
        else
        {
            double spacing = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < points.size(); ++j)
            {
                if (j != idx)
                {
                    spacing = std::min(spacing, (points[j] - points[idx]).norm());
                }
            }
            cand = refine_projected(model, {0, points[idx], values[idx]}, spacing,
                                    options.param_tolerance, value_at);
        }
        result.candidates.push_back(cand);
    }
    std::sort(result.candidates.begin(), result.candidates.end(),
              [](auto const& a, auto const& b) { return a.value < b.value; });

    auto const& best = result.candidates.front();
    result.value = best.value;
    result.param = best.param;
    result.point = best.point;
    for (auto const& other : result.candidates)
    {
        if (other.value <= best.value + options.tie_value_tolerance
            && (other.point - best.point).norm() > options.tie_distance)
        {
            result.ambiguous = true;
        }
    }
    // A boundary that is flat to within the tolerance has no isolated minimizer.
    Vec const extent = domain.upper_corner() - domain.lower_corner();
    if (coarse_max - coarse_min <= options.tie_value_tolerance
        && extent.norm() > options.tie_distance)
    {
        result.ambiguous = true;
    }
    return result;
}

//---------------------------------------------------------------------------//
// Root of M^{λ,k} = λ
//---------------------------------------------------------------------------//

RootEntry solve_m(ModelSpec const& model, int k, RootOptions const& options)
{
    if (k < 0 || k >= model.states())
    {
        throw InputError("state index out of range");
    }
    std::vector<double> grid = options.lambda_grid;
    if (grid.empty())
    {
        for (int i = 0; i < 32; ++i)
        {
            grid.push_back(model.horizon * i / 31.0);
        }
    }
    if (grid.size() < 2 || !std::is_sorted(grid.begin(), grid.end()))
    {
        throw InputError("λ grid must be sorted with at least two points");
    }

    RootEntry entry;
    entry.state = k;
    for (double lambda : grid)
    {
        auto const bm = boundary_min(model, lambda, k, options.boundary);
        entry.profile.push_back({lambda, bm.value, bm.param, bm.point, bm.ambiguous});
    }
    if (!(entry.profile.front().value > 0))
    {
        throw NoRootError("M^{λ,k} must be positive at the start of the grid");
    }

    auto f = [](ProfilePoint const& p) { return p.value - p.lambda; };
    int changes = 0;
    std::size_t bracket = 0;
    bool exact = false;
    for (std::size_t i = 0; i + 1 < entry.profile.size(); ++i)
    {
        double const a = f(entry.profile[i]);
        double const b = f(entry.profile[i + 1]);
        if (b == 0 && i + 2 < entry.profile.size())
        {
            continue;  // counted when leaving the zero
        }
        if ((a > 0 && b <= 0) || (a < 0 && b >= 0) || (a == 0 && b != 0 && i > 0))
        {
            ++changes;
            bracket = i;
            exact = (b == 0);
        }
    }
    if (changes == 0)
    {
        throw NoRootError("M^{λ,k} - λ has no sign change on the grid (state "
                          + std::to_string(k + 1) + "); increase Lambda");
    }
    if (changes > 1)
    {
        throw MultipleRootError("M^{λ,k} = λ has " + std::to_string(changes)
                                + " roots on the grid (state " + std::to_string(k + 1)
                                + ")");
    }

    double lo = entry.profile[bracket].lambda;
    double hi = entry.profile[bracket + 1].lambda;
    if (exact)
    {
        lo = hi;
    }
    while (hi - lo > options.tolerance)
    {
        double const mid = 0.5 * (lo + hi);
        double const value = boundary_min(model, mid, k, options.boundary).value - mid;
        if (value > 0)
        {
            lo = mid;
        }
        else
        {
            hi = mid;
        }
    }
    entry.root = 0.5 * (lo + hi);
    auto const at_root = boundary_min(model, entry.root, k, options.boundary);
    entry.value_at_root = at_root.value;
    entry.param = at_root.param;
    entry.exit_point = at_root.point;
    entry.ambiguous = at_root.ambiguous;
    return entry;
}

ExitPointResult exit_point(ModelSpec const& model, int k, RootEntry const& root,
                           BoundaryMinOptions const& options, double window_halfwidth,
                           int window_points)
{
    auto const at_root = boundary_min(model, root.root, k, options);
    if (at_root.ambiguous)
    {
        throw AmbiguousMinimizerError("boundary minimum at m^k is not attained at a single "
                                      "point (state "
                                      + std::to_string(k + 1) + ")");
    }
    ExitPointResult result;
    result.point = at_root.point;
    result.param = at_root.param;
    result.value = at_root.value;
    for (int i = 0; i < window_points; ++i)
    {
        double const offset = window_points > 1
                                  ? -window_halfwidth
                                        + 2.0 * window_halfwidth * i / (window_points - 1)
                                  : 0.0;
        double const lambda = std::clamp(root.root + offset, 0.0, model.horizon);
        auto const bm = boundary_min(model, lambda, k, options);
        result.window.push_back({lambda, bm.value, bm.param, bm.point, bm.ambiguous});
    }
    return result;
}

ExitPointResult exit_point(ModelSpec const& model, int k, RootOptions const& options)
{
    return exit_point(model, k, solve_m(model, k, options), options.boundary);
}

}  // namespace exitlab
