// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>

#include "exitlab/errors.hpp"
#include "exitlab/golden.hpp"
#include "exitlab/rng.hpp"

namespace exitlab {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double angle)
{
    double const wrapped = std::fmod(angle, kTwoPi);
    return wrapped < 0 ? wrapped + kTwoPi : wrapped;
}

Vec json_vec(nlohmann::json const& j, int dimension, char const* what)
{
    if (!j.is_array() || static_cast<int>(j.size()) != dimension)
    {
        throw InputError(std::string(what) + ": expected an array of length "
                         + std::to_string(dimension));
    }
    Vec v(dimension);
    for (int i = 0; i < dimension; ++i)
    {
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

}  // namespace

//---------------------------------------------------------------------------//
// Domain
//---------------------------------------------------------------------------//

Vec Domain::point_at(double) const
{
    throw InputError("domain '" + kind() + "' has no boundary parametrization");
}

double Domain::param_of(Vec const&) const
{
    throw InputError("domain '" + kind() + "' has no boundary parametrization");
}

Vec Domain::project(Vec const& start) const
{
    Vec x = start;
    for (int it = 0; it < 100; ++it)
    {
        double const g = level(x);
        Vec const grad = gradient(x);
        double const norm2 = grad.squaredNorm();
        if (norm2 < gradient_floor_ * gradient_floor_)
        {
            throw BoundaryDegeneracyError("projection hit a vanishing level-set gradient");
        }
        x -= (g / norm2) * grad;
        if (std::abs(level(x)) <= 1e-13)
        {
            return x;
        }
    }
    throw GeometryError("boundary projection did not converge");
}

double Domain::distance_to_boundary(Vec const& x) const
{
    return (project(x) - x).norm();
}

Vec Domain::normal(Vec const& x) const
{
    Vec const grad = gradient(x);
    double const norm = grad.norm();
    if (!(norm >= gradient_floor_))
    {
        throw BoundaryDegeneracyError("level-set gradient below floor at boundary point");
    }
    return grad / norm;
}

BoundaryPoint Domain::boundary_point(double param) const
{
    if (!parametric())
    {
        throw InputError("boundary_point requires a parametrized (d = 2) boundary");
    }
    BoundaryPoint bp;
    bp.param = param;
    bp.point = point_at(param);
    bp.normal = normal(bp.point);
    return bp;
}

std::vector<Vec> Domain::sample_boundary(int n) const
{
    std::vector<Vec> points;
    points.reserve(static_cast<std::size_t>(std::max(n, 0)));
    if (parametric())
    {
        for (int i = 0; i < n; ++i)
        {
            points.push_back(point_at(kTwoPi * i / n));
        }
        return points;
    }
    // Fibonacci directions from the box center, projected onto the boundary.
    Vec const center = 0.5 * (lower_corner() + upper_corner());
    int const d = dimension();
    double const golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i)
    {
        Vec dir = Vec::Zero(d);
        if (d == 1)
        {
            dir[0] = (i % 2 == 0) ? 1.0 : -1.0;
        }
        else if (d == 2)
        {
            dir[0] = std::cos(kTwoPi * i / n);
            dir[1] = std::sin(kTwoPi * i / n);
        }
        else
        {
            double const z = 1.0 - 2.0 * (i + 0.5) / n;
            double const rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            dir[0] = rho * std::cos(golden_angle * i);
            dir[1] = rho * std::sin(golden_angle * i);
            dir[2] = z;
        }
        Vec const half_extent = 0.5 * (upper_corner() - lower_corner());
        points.push_back(project(center + 0.5 * half_extent.cwiseProduct(dir)));
    }
    return points;
}

BallDomain::BallDomain(Vec center, double radius)
    : center_(std::move(center)), radius_(radius)
{
    if (!(radius_ > 0))
    {
        throw InputError("ball radius must be positive");
    }
}

double BallDomain::level(Vec const& x) const
{
    return ((x - center_).squaredNorm() - radius_ * radius_) / (2.0 * radius_);
}

Vec BallDomain::gradient(Vec const& x) const
{
    return (x - center_) / radius_;
}

Vec BallDomain::lower_corner() const
{
    return center_.array() - radius_;
}

Vec BallDomain::upper_corner() const
{
    return center_.array() + radius_;
}

Vec BallDomain::point_at(double param) const
{
    if (dimension() != 2)
    {
        return Domain::point_at(param);
    }
    return center_ + radius_ * make_vec({std::cos(param), std::sin(param)});
}

double BallDomain::param_of(Vec const& x) const
{
    if (dimension() != 2)
    {
        return Domain::param_of(x);
    }
    Vec const rel = x - center_;
    return wrap_angle(std::atan2(rel[1], rel[0]));
}

Vec BallDomain::project(Vec const& x) const
{
    Vec rel = x - center_;
    double const norm = rel.norm();
    if (norm == 0)
    {
        rel = Vec::Zero(dimension());
        rel[0] = 1;
        return center_ + radius_ * rel;
    }
    return center_ + (radius_ / norm) * rel;
}

double BallDomain::distance_to_boundary(Vec const& x) const
{
    return std::abs(radius_ - (x - center_).norm());
}

EllipseDomain::EllipseDomain(Vec center, double semi_x, double semi_y)
    : center_(std::move(center)), semi_x_(semi_x), semi_y_(semi_y)
{
    if (center_.size() != 2 || !(semi_x_ > 0) || !(semi_y_ > 0))
    {
        throw InputError("ellipse needs a 2-d center and positive semi-axes");
    }
}

double EllipseDomain::level(Vec const& x) const
{
    double const u = (x[0] - center_[0]) / semi_x_;
    double const v = (x[1] - center_[1]) / semi_y_;
    return 0.5 * (u * u + v * v - 1.0);
}

Vec EllipseDomain::gradient(Vec const& x) const
{
    return make_vec({(x[0] - center_[0]) / (semi_x_ * semi_x_),
                     (x[1] - center_[1]) / (semi_y_ * semi_y_)});
}

Vec EllipseDomain::lower_corner() const
{
    return center_ - make_vec({semi_x_, semi_y_});
}

Vec EllipseDomain::upper_corner() const
{
    return center_ + make_vec({semi_x_, semi_y_});
}

Vec EllipseDomain::point_at(double param) const
{
    return center_ + make_vec({semi_x_ * std::cos(param), semi_y_ * std::sin(param)});
}

double EllipseDomain::param_of(Vec const& x) const
{
    return wrap_angle(
        std::atan2((x[1] - center_[1]) / semi_y_, (x[0] - center_[0]) / semi_x_));
}

double EllipseDomain::closest_param(Vec const& x) const
{
    auto dist2 = [&](double t) { return (point_at(t) - x).squaredNorm(); };
    constexpr int kCoarse = 128;
    int best = 0;
    double best_value = dist2(0);
    for (int i = 1; i < kCoarse; ++i)
    {
        double const value = dist2(kTwoPi * i / kCoarse);
        if (value < best_value)
        {
            best_value = value;
            best = i;
        }
    }
    double const step = kTwoPi / kCoarse;
    auto const refined = golden_section_minimize(dist2, (best - 1) * step,
                                                 (best + 1) * step, 1e-13);
    return wrap_angle(refined.argmin);
}

Vec EllipseDomain::project(Vec const& x) const
{
    return point_at(closest_param(x));
}

double EllipseDomain::distance_to_boundary(Vec const& x) const
{
    return (project(x) - x).norm();
}

ImplicitDomain::ImplicitDomain(LevelFn level, GradientFn gradient, Vec lower, Vec upper,
                               ParamFn parametrization)
    : level_(std::move(level))
    , gradient_(std::move(gradient))
    , lower_(std::move(lower))
    , upper_(std::move(upper))
    , param_(std::move(parametrization))
{
    if (!level_ || !gradient_ || lower_.size() != upper_.size())
    {
        throw InputError("implicit domain needs level, gradient and a bounding box");
    }
}

Vec ImplicitDomain::point_at(double param) const
{
    if (!param_)
    {
        return Domain::point_at(param);
    }
    return param_(param);
}

double ImplicitDomain::param_of(Vec const& x) const
{
    if (!param_)
    {
        return Domain::param_of(x);
    }
    auto dist2 = [&](double t) { return (param_(t) - x).squaredNorm(); };
    constexpr int kCoarse = 256;
    int best = 0;
    double best_value = dist2(0);
    for (int i = 1; i < kCoarse; ++i)
    {
        double const value = dist2(kTwoPi * i / kCoarse);
        if (value < best_value)
        {
            best_value = value;
            best = i;
        }
    }
    double const step = kTwoPi / kCoarse;
    return wrap_angle(
        golden_section_minimize(dist2, (best - 1) * step, (best + 1) * step, 1e-13).argmin);
}

//---------------------------------------------------------------------------//
// Chain and coefficients
//---------------------------------------------------------------------------//

void ChainSpec::validate(double tolerance) const
{
    int const s = states();
    if (s < 1 || generator.cols() != s || initial.size() != s)
    {
        throw InputError("chain: generator must be s x s and π₀ of length s");
    }
    for (int i = 0; i < s; ++i)
    {
        double row = 0;
        for (int j = 0; j < s; ++j)
        {
            if (i != j && generator(i, j) < 0)
            {
                throw InputError("chain: negative off-diagonal rate");
            }
            row += generator(i, j);
        }
        if (std::abs(row) > tolerance)
        {
            throw InputError("chain: generator row " + std::to_string(i + 1)
                             + " does not sum to zero");
        }
        if (initial[i] < 0)
        {
            throw InputError("chain: negative initial probability");
        }
    }
    if (std::abs(initial.sum() - 1.0) > tolerance)
    {
        throw InputError("chain: initial distribution does not sum to one");
    }
}

Mat ModelSpec::diffusion(Vec const& x, double lambda, int k) const
{
    Mat const s = sigma(x, lambda, k);
    return s * s.transpose();
}

Mat ModelSpec::diffusion_inverse(Vec const& x, double lambda, int k) const
{
    Mat const a = diffusion(x, lambda, k);
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success)
    {
        throw MatrixError("diffusion matrix is not positive definite");
    }
    Mat const inv = llt.solve(Mat::Identity(a.rows(), a.cols()));
    if (!inv.allFinite())
    {
        throw MatrixError("diffusion matrix inversion produced non-finite values");
    }
    return inv;
}

Mat ModelSpec::drift_jacobian(Vec const& x, double lambda, int k) const
{
    auto const& coeff = coefficients[static_cast<std::size_t>(k)];
    if (coeff.drift_jacobian)
    {
        return coeff.drift_jacobian(x, lambda);
    }
    int const d = static_cast<int>(x.size());
    Mat jac(d, d);
    for (int j = 0; j < d; ++j)
    {
        double const step = 1e-6 * std::max(1.0, std::abs(x[j]));
        Vec plus = x;
        Vec minus = x;
        plus[j] += step;
        minus[j] -= step;
        jac.col(j) = (coeff.drift(plus, lambda) - coeff.drift(minus, lambda)) / (2 * step);
    }
    return jac;
}

void ModelSpec::validate() const
{
    if (dimension < 1 || dimension > kMaxDim)
    {
        throw InputError("dimension must be in [1, 3]");
    }
    if (coefficients.empty())
    {
        throw InputError("model needs at least one chain state");
    }
    for (auto const& c : coefficients)
    {
        if (!c.drift || !c.sigma)
        {
            throw InputError("every state needs drift and sigma evaluators");
        }
    }
    if (!domain || domain->dimension() != dimension)
    {
        throw InputError("domain dimension does not match the model");
    }
    if (equilibrium.size() != dimension)
    {
        throw InputError("equilibrium O has the wrong dimension");
    }
    if (!(domain->level(equilibrium) < 0))
    {
        throw InputError("equilibrium O must lie inside D");
    }
    if (!(confinement_c > 0) || !(confinement_r > 0) || !(horizon > 0))
    {
        throw InputError("c, r and Lambda must be positive");
    }
    if (chain.states() != states())
    {
        throw InputError("chain state count does not match the coefficient count");
    }
    chain.validate();
}

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//
namespace {

struct Registry
{
    std::mutex mutex;
    std::map<std::string, DriftFactory> drifts;
    std::map<std::string, SigmaFactory> sigmas;
    std::map<std::string, DomainFactory> domains;
};

Registry& registry()
{
    static Registry instance;
    return instance;
}

/// β(λ) = beta0 · exp(-rate · λ)
std::function<double(double)> decay_profile(nlohmann::json const& p)
{
    double const beta0 = p.value("beta0", 1.0);
    double const rate = p.value("rate", 0.0);
    return [beta0, rate](double lambda) { return beta0 * std::exp(-rate * lambda); };
}

StateCoefficients builtin_drift(nlohmann::json const& p, Vec const& origin)
{
    std::string const kind = p.at("kind").get<std::string>();
    int const d = static_cast<int>(origin.size());
    StateCoefficients coeff;
    if (kind == "radial_decay")
    {
        auto beta = decay_profile(p);
        coeff.drift = [beta, origin](Vec const& x, double lambda) -> Vec {
            return -beta(lambda) * (x - origin);
        };
        coeff.drift_jacobian = [beta, d](Vec const&, double lambda) -> Mat {
            return -beta(lambda) * Mat::Identity(d, d);
        };
    }
    else if (kind == "anisotropic_well")
    {
        // b = -β(λ) diag(α) (x - O), the gradient flow of ½β Σ α_i (x_i - O_i)²
        auto beta = decay_profile(p);
        Vec const alpha = json_vec(p.at("alpha"), d, "anisotropic_well.alpha");
        coeff.drift = [beta, alpha, origin](Vec const& x, double lambda) -> Vec {
            return -beta(lambda) * alpha.cwiseProduct(x - origin);
        };
        coeff.drift_jacobian = [beta, alpha](Vec const&, double lambda) -> Mat {
            return (-beta(lambda) * alpha).asDiagonal();
        };
    }
    else if (kind == "linear")
    {
        // b = β(λ) A (x - O)
        auto beta = decay_profile(p);
        auto const& rows = p.at("matrix");
        Mat A(d, d);
        for (int i = 0; i < d; ++i)
        {
            A.row(i) = json_vec(rows.at(static_cast<std::size_t>(i)), d, "linear.matrix")
                           .transpose();
        }
        coeff.drift = [beta, A, origin](Vec const& x, double lambda) -> Vec {
            return beta(lambda) * (A * (x - origin));
        };
        coeff.drift_jacobian = [beta, A](Vec const&, double lambda) -> Mat {
            return beta(lambda) * A;
        };
    }
    else if (kind == "zero")
    {
        coeff.drift = [d](Vec const&, double) -> Vec { return Vec::Zero(d); };
        coeff.drift_jacobian = [d](Vec const&, double) -> Mat { return Mat::Zero(d, d); };
    }
    else
    {
        DriftFactory factory;
        {
            std::lock_guard<std::mutex> lock(registry().mutex);
            auto it = registry().drifts.find(kind);
            if (it == registry().drifts.end())
            {
                throw InputError("unknown drift kind '" + kind + "'");
            }
            factory = it->second;
        }
        return factory(p, origin);
    }
    return coeff;
}

void attach_sigma(StateCoefficients& coeff, nlohmann::json const& p, int d)
{
    std::string const kind = p.is_string() ? p.get<std::string>()
                                           : p.at("kind").get<std::string>();
    if (kind == "identity")
    {
        coeff.sigma = [d](Vec const&, double) -> Mat { return Mat::Identity(d, d); };
        coeff.sigma_constant_in_x = true;
    }
    else if (kind == "scaled")
    {
        double const s = p.at("scale").get<double>();
        coeff.sigma = [d, s](Vec const&, double) -> Mat { return s * Mat::Identity(d, d); };
        coeff.sigma_constant_in_x = true;
    }
    else if (kind == "diagonal")
    {
        Vec const values = json_vec(p.at("values"), d, "sigma.values");
        coeff.sigma = [values](Vec const&, double) -> Mat { return values.asDiagonal(); };
        coeff.sigma_constant_in_x = true;
    }
    else if (kind == "matrix")
    {
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
        {
            m.row(i) = json_vec(p.at("values").at(static_cast<std::size_t>(i)), d,
                                "sigma.values")
                           .transpose();
        }
        coeff.sigma = [m](Vec const&, double) -> Mat { return m; };
        coeff.sigma_constant_in_x = true;
    }
    else
    {
        SigmaFactory factory;
        {
            std::lock_guard<std::mutex> lock(registry().mutex);
            auto it = registry().sigmas.find(kind);
            if (it == registry().sigmas.end())
            {
                throw InputError("unknown sigma kind '" + kind + "'");
            }
            factory = it->second;
        }
        coeff.sigma = factory(p, d);
        coeff.sigma_constant_in_x = p.is_object() && p.value("constant_in_x", false);
    }
}

}  // namespace

void register_drift(std::string const& name, DriftFactory factory)
{
    std::lock_guard<std::mutex> lock(registry().mutex);
    registry().drifts[name] = std::move(factory);
}

void register_sigma(std::string const& name, SigmaFactory factory)
{
    std::lock_guard<std::mutex> lock(registry().mutex);
    registry().sigmas[name] = std::move(factory);
}

void register_domain(std::string const& name, DomainFactory factory)
{
    std::lock_guard<std::mutex> lock(registry().mutex);
    registry().domains[name] = std::move(factory);
}

DomainPtr make_domain(nlohmann::json const& config)
{
    std::string const kind = config.at("kind").get<std::string>();
    if (kind == "ball")
    {
        auto const& c = config.at("center");
        return std::make_shared<BallDomain>(json_vec(c, static_cast<int>(c.size()), "center"),
                                            config.at("radius").get<double>());
    }
    if (kind == "ellipse")
    {
        auto const& axes = config.at("semi_axes");
        Vec center = config.contains("center") ? json_vec(config["center"], 2, "center")
                                               : Vec(Vec::Zero(2));
        return std::make_shared<EllipseDomain>(center, axes.at(0).get<double>(),
                                               axes.at(1).get<double>());
    }
    DomainFactory factory;
    {
        std::lock_guard<std::mutex> lock(registry().mutex);
        auto it = registry().domains.find(kind);
        if (it == registry().domains.end())
        {
            throw InputError("unknown domain kind '" + kind + "'");
        }
        factory = it->second;
    }
    return factory(config);
}

ModelSpec model_from_json(nlohmann::json const& config)
{
    try
    {
        ModelSpec model;
        model.source = config;
        model.dimension = config.at("dimension").get<int>();
        int const s = config.value("states", 1);
        if (model.dimension < 1 || model.dimension > kMaxDim || s < 1)
        {
            throw InputError("dimension must be in [1, 3] and states >= 1");
        }
        model.equilibrium = json_vec(config.at("O"), model.dimension, "O");
        model.domain = make_domain(config.at("domain"));
        model.confinement_c = config.at("c").get<double>();
        model.confinement_r = config.at("r").get<double>();
        model.horizon = config.at("Lambda").get<double>();

        auto per_state = [&](nlohmann::json const& j, int k) -> nlohmann::json const& {
            if (j.is_array())
            {
                if (static_cast<int>(j.size()) != s)
                {
                    throw InputError("per-state coefficient array has the wrong length");
                }
                return j[static_cast<std::size_t>(k)];
            }
            return j;
        };
        nlohmann::json const sigma_default = "identity";
        nlohmann::json const& sigma_cfg
            = config.contains("sigma") ? config["sigma"] : sigma_default;
        for (int k = 0; k < s; ++k)
        {
            StateCoefficients coeff
                = builtin_drift(per_state(config.at("drift"), k), model.equilibrium);
            attach_sigma(coeff, per_state(sigma_cfg, k), model.dimension);
            model.coefficients.push_back(std::move(coeff));
        }

        model.chain.generator = Eigen::MatrixXd::Zero(s, s);
        if (config.contains("Q"))
        {
            auto const& q = config["Q"];
            if (static_cast<int>(q.size()) != s * s)
            {
                throw InputError("Q must be a row-major array of length states^2");
            }
            for (int i = 0; i < s; ++i)
            {
                for (int j = 0; j < s; ++j)
                {
                    model.chain.generator(i, j)
                        = q[static_cast<std::size_t>(i * s + j)].get<double>();
                }
            }
        }
        model.chain.initial = Eigen::VectorXd::Zero(s);
        if (config.contains("pi0"))
        {
            auto const& p = config["pi0"];
            if (static_cast<int>(p.size()) != s)
            {
                throw InputError("pi0 must have length states");
            }
            for (int i = 0; i < s; ++i)
            {
                model.chain.initial[i] = p[static_cast<std::size_t>(i)].get<double>();
            }
        }
        else
        {
            model.chain.initial[0] = 1.0;
        }

        if (config.contains("bounds"))
        {
            auto const& b = config["bounds"];
            model.bounds.ellipticity_lower = b.value("ellipticity_lower", 0.0);
            model.bounds.ellipticity_upper = b.value("ellipticity_upper", 0.0);
            model.bounds.drift_bound = b.value("drift_bound", 0.0);
            model.bounds.lipschitz = b.value("lipschitz", 0.0);
        }
        model.validate();
        return model;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw InputError(std::string("model config: ") + e.what());
    }
}

ModelSpec load_model(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw InputError("cannot open model file '" + path + "'");
    }
    nlohmann::json config;
    try
    {
        in >> config;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw InputError("model file '" + path + "': " + e.what());
    }
    return model_from_json(config);
}

//---------------------------------------------------------------------------//
// Assumption checks
//---------------------------------------------------------------------------//
namespace {

std::vector<double> lambda_samples(double horizon, int n)
{
    std::vector<double> out;
    if (n <= 1)
    {
        out.push_back(n == 1 ? horizon : 0.0);
        return out;
    }
    for (int i = 0; i < n; ++i)
    {
        out.push_back(horizon * i / (n - 1));
    }
    return out;
}

/// Uniform point in the ball of radius r around c.
Vec sample_in_ball(RandomStream& rng, Vec const& c, double r)
{
    int const d = static_cast<int>(c.size());
    Vec dir(d);
    for (int i = 0; i < d; ++i)
    {
        dir[i] = rng.normal();
    }
    double const norm = dir.norm();
    double const radius = r * std::pow(rng.uniform(), 1.0 / d);
    return c + (radius / norm) * dir;
}

}  // namespace

CheckReport check_inward_drift(ModelSpec const& model, int n_boundary_samples,
                               int n_lambda_samples, double tolerance)
{
    if (n_boundary_samples < 1 || n_lambda_samples < 1)
    {
        throw InputError("sample counts must be at least 1");
    }
    auto const points = model.domain->sample_boundary(n_boundary_samples);
    auto const lambdas = lambda_samples(model.horizon, n_lambda_samples);
    CheckReport report;
    report.max_value = -std::numeric_limits<double>::infinity();
    for (auto const& x : points)
    {
        Vec const n = model.domain->normal(x);
        for (double lambda : lambdas)
        {
            for (int k = 0; k < model.states(); ++k)
            {
                report.max_value = std::max(report.max_value, model.drift(x, lambda, k).dot(n));
                ++report.samples;
            }
        }
    }
    report.pass = report.max_value <= -model.confinement_c + tolerance;
    return report;
}

CheckReport check_equilibrium_confinement(ModelSpec const& model, int n_samples,
                                          std::uint64_t seed, int n_lambda_samples,
                                          double tolerance)
{
    if (n_samples < 1)
    {
        throw InputError("sample count must be at least 1");
    }
    RandomStream rng(seed, 0, Substream::sampling);
    auto const lambdas = lambda_samples(model.horizon, n_lambda_samples);
    CheckReport report;
    report.max_value = -std::numeric_limits<double>::infinity();
    Vec const& origin = model.equilibrium;
    for (int i = 0; i < n_samples; ++i)
    {
        Vec const x = sample_in_ball(rng, origin, model.confinement_r);
        Vec const rel = x - origin;
        double const lambda = lambdas[static_cast<std::size_t>(i) % lambdas.size()];
        for (int k = 0; k < model.states(); ++k)
        {
            double const value = model.drift(x, lambda, k).dot(rel)
                                 + model.confinement_c * rel.squaredNorm();
            report.max_value = std::max(report.max_value, value);
            ++report.samples;
        }
    }
    report.pass = report.max_value <= tolerance;
    return report;
}

double attraction_entry_time(ModelSpec const& model, Vec const& start, double lambda, int k,
                             AttractionOptions const& options)
{
    Vec const& origin = model.equilibrium;
    double const r = model.confinement_r;
    auto distance = [&](Vec const& x) { return (x - origin).norm() - r; };
    if (distance(start) < 0)
    {
        return 0;
    }
    Vec const lo = model.domain->lower_corner();
    Vec const hi = model.domain->upper_corner();
    Vec const mid = 0.5 * (lo + hi);
    Vec const half = 0.5 * options.box_inflation * (hi - lo);

    double const dt = options.time_step;
    double const t_max = options.max_time_factor / model.confinement_c;
    auto f = [&](Vec const& x) { return model.drift(x, lambda, k); };
    Vec x = start;
    double t = 0;
    double dist = distance(x);
    while (t < t_max)
    {
        Vec const k1 = f(x);
        Vec const k2 = f(x + 0.5 * dt * k1);
        Vec const k3 = f(x + 0.5 * dt * k2);
        Vec const k4 = f(x + dt * k3);
        Vec const next = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        double const next_dist = distance(next);
        if (next_dist < 0)
        {
            return t + dt * dist / (dist - next_dist);
        }
        if (((next - mid).cwiseAbs() - half).maxCoeff() > 0)
        {
            throw NonAttractionError("frozen flow left the inflated bounding box");
        }
        x = next;
        dist = next_dist;
        t += dt;
    }
    return std::numeric_limits<double>::infinity();
}

AttractionReport check_attraction_time(ModelSpec const& model, int n_initial,
                                       std::vector<double> const& lambda_grid,
                                       AttractionOptions const& options)
{
    if (n_initial < 1 || lambda_grid.empty())
    {
        throw InputError("need at least one initial point and one λ value");
    }
    // Half on the boundary (slowest starts), the rest on an interior grid.
    int const n_boundary = std::max(1, n_initial / 2);
    std::vector<Vec> starts = model.domain->sample_boundary(n_boundary);
    int const d = model.dimension;
    Vec const lo = model.domain->lower_corner();
    Vec const hi = model.domain->upper_corner();
    int const remaining = n_initial - n_boundary;
    if (remaining > 0)
    {
        int per_axis = 2;
        while (std::pow(per_axis, d) * 0.5 < remaining)
        {
            ++per_axis;
        }
        std::vector<Vec> grid;
        int const total = static_cast<int>(std::pow(per_axis, d));
        for (int idx = 0; idx < total; ++idx)
        {
            Vec x(d);
            int rest = idx;
            for (int a = 0; a < d; ++a)
            {
                int const i = rest % per_axis;
                rest /= per_axis;
                x[a] = lo[a] + (hi[a] - lo[a]) * (i + 0.5) / per_axis;
            }
            if (model.domain->level(x) <= 0)
            {
                grid.push_back(x);
            }
        }
        std::size_t const stride
            = std::max<std::size_t>(1, grid.size() / static_cast<std::size_t>(remaining));
        for (std::size_t i = 0; i < grid.size()
                                && static_cast<int>(starts.size()) < n_initial;
             i += stride)
        {
            starts.push_back(grid[i]);
        }
    }

    AttractionReport report;
    for (auto const& x0 : starts)
    {
        for (double lambda : lambda_grid)
        {
            for (int k = 0; k < model.states(); ++k)
            {
                double const t = attraction_entry_time(model, x0, lambda, k, options);
                report.max_entry_time = std::max(report.max_entry_time, t);
                ++report.trajectories;
            }
        }
    }
    report.pass = report.max_entry_time < 1.0 / model.confinement_c;
    return report;
}

CoefficientReport validate_coefficients(ModelSpec const& model, int n_samples,
                                        std::uint64_t seed)
{
    RandomStream rng(seed, 1, Substream::sampling);
    Vec const lo = model.domain->lower_corner();
    Vec const hi = model.domain->upper_corner();
    int const d = model.dimension;
    CoefficientReport report;
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    auto uniform_point = [&] {
        Vec x(d);
        for (int a = 0; a < d; ++a)
        {
            x[a] = lo[a] + (hi[a] - lo[a]) * rng.uniform();
        }
        return x;
    };
    for (int i = 0; i < n_samples; ++i)
    {
        Vec x = uniform_point();
        if (model.domain->level(x) > 0)
        {
            x = model.domain->project(x);
        }
        double const lambda = model.horizon * rng.uniform();
        int const k = static_cast<int>(rng.uniform() * model.states());

        Eigen::SelfAdjointEigenSolver<Mat> eig(model.diffusion(x, lambda, k));
        report.min_eigenvalue = std::min(report.min_eigenvalue, eig.eigenvalues().minCoeff());
        report.max_eigenvalue = std::max(report.max_eigenvalue, eig.eigenvalues().maxCoeff());

        Vec const b = model.drift(x, lambda, k);
        report.max_drift = std::max(report.max_drift, b.norm());

        report.max_drift_at_equilibrium = std::max(
            report.max_drift_at_equilibrium, model.drift(model.equilibrium, lambda, k).norm());

        Vec y = x;
        for (int a = 0; a < d; ++a)
        {
            y[a] += 1e-3 * (hi[a] - lo[a]) * (rng.uniform() - 0.5);
        }
        double const dx = (y - x).norm();
        if (dx > 0)
        {
            report.lipschitz_estimate = std::max(
                report.lipschitz_estimate, (model.drift(y, lambda, k) - b).norm() / dx);
        }
    }
    auto const& bounds = model.bounds;
    report.ellipticity_ok = report.min_eigenvalue > 0
                            && report.min_eigenvalue >= bounds.ellipticity_lower
                            && (bounds.ellipticity_upper <= 0
                                || report.max_eigenvalue <= bounds.ellipticity_upper);
    report.drift_bound_ok = bounds.drift_bound <= 0 || report.max_drift <= bounds.drift_bound;
    report.equilibrium_ok = report.max_drift_at_equilibrium <= 1e-10;
    report.lipschitz_ok = bounds.lipschitz <= 0 || report.lipschitz_estimate <= bounds.lipschitz;
    return report;
}

}  // namespace exitlab
