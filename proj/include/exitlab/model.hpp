// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "exitlab/linalg.hpp"

namespace exitlab {

//---------------------------------------------------------------------------//
// Domain
//---------------------------------------------------------------------------//

struct BoundaryPoint
{
    Vec point;
    Vec normal;  //!< outward unit normal
    double param = 0;
};

/*!
 * Bounded domain D = {g < 0} with smooth boundary {g = 0}.
 *
 * Two-dimensional built-ins carry an angle-like parametrization of the
 * boundary with period 2π; other shapes fall back to Newton projection along
 * the gradient of g.
 */
class Domain
{
  public:
    virtual ~Domain() = default;

    virtual std::string kind() const = 0;
    virtual int dimension() const = 0;
    virtual double level(Vec const& x) const = 0;
    virtual Vec gradient(Vec const& x) const = 0;
    virtual Vec lower_corner() const = 0;
    virtual Vec upper_corner() const = 0;

    virtual bool parametric() const { return false; }
    virtual Vec point_at(double param) const;
    virtual double param_of(Vec const& x) const;

    /// Closest (or, for implicit shapes, Newton-projected) boundary point.
    virtual Vec project(Vec const& x) const;
    virtual double distance_to_boundary(Vec const& x) const;

    bool contains(Vec const& x) const { return level(x) < 0; }

    /// Outward unit normal; throws BoundaryDegeneracyError below the floor.
    Vec normal(Vec const& x) const;

    /// Point and normal at a boundary parameter (parametric shapes only).
    BoundaryPoint boundary_point(double param) const;

    /// Deterministic boundary sample of size n.
    std::vector<Vec> sample_boundary(int n) const;

    double gradient_floor() const { return gradient_floor_; }
    void set_gradient_floor(double floor) { gradient_floor_ = floor; }

  private:
    double gradient_floor_ = 1e-8;
};

using DomainPtr = std::shared_ptr<Domain const>;

class BallDomain final : public Domain
{
  public:
    BallDomain(Vec center, double radius);

    std::string kind() const override { return "ball"; }
    int dimension() const override { return static_cast<int>(center_.size()); }
    double level(Vec const& x) const override;
    Vec gradient(Vec const& x) const override;
    Vec lower_corner() const override;
    Vec upper_corner() const override;
    bool parametric() const override { return dimension() == 2; }
    Vec point_at(double param) const override;
    double param_of(Vec const& x) const override;
    Vec project(Vec const& x) const override;
    double distance_to_boundary(Vec const& x) const override;

    Vec const& center() const { return center_; }
    double radius() const { return radius_; }

  private:
    Vec center_;
    double radius_;
};

/// Axis-aligned ellipse (x/a)^2 + (y/b)^2 < 1 around a center.
class EllipseDomain final : public Domain
{
  public:
    EllipseDomain(Vec center, double semi_x, double semi_y);

    std::string kind() const override { return "ellipse"; }
    int dimension() const override { return 2; }
    double level(Vec const& x) const override;
    Vec gradient(Vec const& x) const override;
    Vec lower_corner() const override;
    Vec upper_corner() const override;
    bool parametric() const override { return true; }
    Vec point_at(double param) const override;
    double param_of(Vec const& x) const override;
    Vec project(Vec const& x) const override;
    double distance_to_boundary(Vec const& x) const override;

  private:
    double closest_param(Vec const& x) const;

    Vec center_;
    double semi_x_;
    double semi_y_;
};

/// User-supplied level set with an explicit bounding box.
class ImplicitDomain final : public Domain
{
  public:
    using LevelFn = std::function<double(Vec const&)>;
    using GradientFn = std::function<Vec(Vec const&)>;
    using ParamFn = std::function<Vec(double)>;

    ImplicitDomain(LevelFn level, GradientFn gradient, Vec lower, Vec upper,
                   ParamFn parametrization = {});

    std::string kind() const override { return "implicit"; }
    int dimension() const override { return static_cast<int>(lower_.size()); }
    double level(Vec const& x) const override { return level_(x); }
    Vec gradient(Vec const& x) const override { return gradient_(x); }
    Vec lower_corner() const override { return lower_; }
    Vec upper_corner() const override { return upper_; }
    bool parametric() const override { return static_cast<bool>(param_); }
    Vec point_at(double param) const override;
    double param_of(Vec const& x) const override;

  private:
    LevelFn level_;
    GradientFn gradient_;
    Vec lower_;
    Vec upper_;
    ParamFn param_;
};

//---------------------------------------------------------------------------//
// Chain and coefficients
//---------------------------------------------------------------------------//

/// Generator Q (rows sum to zero) and initial law π₀ on states 0..s-1.
struct ChainSpec
{
    Eigen::MatrixXd generator;
    Eigen::VectorXd initial;

    int states() const { return static_cast<int>(generator.rows()); }

    /// Throws InputError unless Q is a valid generator and π₀ a distribution.
    void validate(double tolerance = 1e-12) const;
};

using DriftFn = std::function<Vec(Vec const&, double)>;
using JacobianFn = std::function<Mat(Vec const&, double)>;
using SigmaFn = std::function<Mat(Vec const&, double)>;

/// Coefficients of one chain state; both evaluators take (x, λ).
struct StateCoefficients
{
    DriftFn drift;
    JacobianFn drift_jacobian;  //!< optional; finite differences otherwise
    SigmaFn sigma;
    bool sigma_constant_in_x = false;
};

/// Declared bounds that the sampled validation compares against.
struct CoefficientBounds
{
    double ellipticity_lower = 0;  //!< k in k|ξ|² ≤ ξᵀaξ
    double ellipticity_upper = 0;  //!< K in ξᵀaξ ≤ K|ξ|²; 0 disables
    double drift_bound = 0;        //!< sup |b|; 0 disables
    double lipschitz = 0;          //!< spatial Lipschitz constant; 0 disables
};

/*!
 * Complete problem instance: coefficients per chain state, domain,
 * equilibrium, confinement constants, chain, and horizon Λ.
 *
 * Immutable after construction; safe to share across threads.
 */
class ModelSpec
{
  public:
    int dimension = 2;
    std::vector<StateCoefficients> coefficients;
    DomainPtr domain;
    Vec equilibrium;
    double confinement_c = 0;
    double confinement_r = 0;
    ChainSpec chain;
    double horizon = 1;
    CoefficientBounds bounds;
    nlohmann::json source;  //!< configuration this model was built from

    int states() const { return static_cast<int>(coefficients.size()); }

    Vec drift(Vec const& x, double lambda, int k) const
    {
        return coefficients[static_cast<std::size_t>(k)].drift(x, lambda);
    }
    Mat sigma(Vec const& x, double lambda, int k) const
    {
        return coefficients[static_cast<std::size_t>(k)].sigma(x, lambda);
    }
    Mat diffusion(Vec const& x, double lambda, int k) const;
    /// a⁻¹; throws MatrixError when a is singular.
    Mat diffusion_inverse(Vec const& x, double lambda, int k) const;
    Mat drift_jacobian(Vec const& x, double lambda, int k) const;

    /// Throws InputError on structural inconsistencies.
    void validate() const;
};

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

using DriftFactory
    = std::function<StateCoefficients(nlohmann::json const& params, Vec const& equilibrium)>;
using SigmaFactory = std::function<SigmaFn(nlohmann::json const& params, int dimension)>;
using DomainFactory = std::function<DomainPtr(nlohmann::json const& params)>;

/// Registers custom coefficients/domains under names usable in configs.
void register_drift(std::string const& name, DriftFactory factory);
void register_sigma(std::string const& name, SigmaFactory factory);
void register_domain(std::string const& name, DomainFactory factory);

DomainPtr make_domain(nlohmann::json const& config);
ModelSpec model_from_json(nlohmann::json const& config);
ModelSpec load_model(std::string const& path);

//---------------------------------------------------------------------------//
// Assumption checks
//---------------------------------------------------------------------------//

struct CheckReport
{
    double max_value = 0;
    bool pass = false;
    std::size_t samples = 0;
};

/// max ⟨b(x,λ,k), n(x)⟩ over sampled ∂D × [0,Λ] × S; pass iff ≤ -c.
CheckReport check_inward_drift(ModelSpec const& model, int n_boundary_samples = 200,
                               int n_lambda_samples = 50, double tolerance = 1e-9);

/// max of ⟨b, x-O⟩ + c|x-O|² over the r-ball; pass iff ≤ 0.
CheckReport check_equilibrium_confinement(ModelSpec const& model, int n_samples = 2000,
                                          std::uint64_t seed = 1,
                                          int n_lambda_samples = 50,
                                          double tolerance = 1e-9);

struct AttractionOptions
{
    double time_step = 1e-3;
    double box_inflation = 1.5;
    double max_time_factor = 10;  //!< give up after this many multiples of 1/c
};

struct AttractionReport
{
    double max_entry_time = 0;
    bool pass = false;
    std::size_t trajectories = 0;
};

/// Integrates x' = b(x,λ,k) from points of D̄; pass iff every entry time into
/// the r-ball around O is below 1/c.
AttractionReport check_attraction_time(ModelSpec const& model, int n_initial,
                                       std::vector<double> const& lambda_grid,
                                       AttractionOptions const& options = {});

/// Entry time into the r-ball for one frozen flow (RK4 + interpolation).
double attraction_entry_time(ModelSpec const& model, Vec const& start, double lambda, int k,
                             AttractionOptions const& options = {});

struct CoefficientReport
{
    double min_eigenvalue = 0;
    double max_eigenvalue = 0;
    double max_drift = 0;
    double max_drift_at_equilibrium = 0;
    double lipschitz_estimate = 0;
    bool ellipticity_ok = false;
    bool drift_bound_ok = false;
    bool equilibrium_ok = false;
    bool lipschitz_ok = false;

    bool pass() const
    {
        return ellipticity_ok && drift_bound_ok && equilibrium_ok && lipschitz_ok;
    }
};

/// Sampled validation of ellipticity, drift bound, b(O)=0 and Lipschitz bound.
CoefficientReport validate_coefficients(ModelSpec const& model, int n_samples = 500,
                                        std::uint64_t seed = 1);

}  // namespace exitlab
