// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "exitlab/action.hpp"
#include "exitlab/chain.hpp"
#include "exitlab/model.hpp"

namespace exitlab {

struct SimConfig
{
    double epsilon = 0.3;
    double step = 0.01;            //!< Euler step h in process time
    Vec x0;                        //!< empty: start at the equilibrium
    double horizon = 0;            //!< censor level Λ; <= 0 uses the model's
    std::vector<double> observe;   //!< λ values at which positions are recorded
    double eta = 0.2;              //!< radius for the near-O / D^η flags
    std::uint64_t seed = 1;
    std::uint64_t max_steps = 1000000000ull;

    void validate(ModelSpec const& model) const;
};

struct Observation
{
    double lambda_obs = 0;
    Vec position;             //!< exit point if already exited
    bool near_equilibrium = false;  //!< |X - O| < η and not exited
    bool in_interior = false;       //!< dist(X, ∂D) ≥ η and not exited
    bool exited = false;
};

struct ExitSample
{
    std::uint64_t idx = 0;
    std::uint64_t seed = 0;
    bool censored = false;
    double tau = 0;         //!< process time of exit (or censor time)
    double lambda_hat = 0;  //!< ε² ln τ
    Vec exit_point;         //!< NaN when censored
    int exit_state = 0;
    std::uint64_t steps = 0;
    std::vector<Observation> observations;
};

/// Modulated diffusion from t = 1 with λ = ε² ln t and a sampled chain path.
ExitSample simulate_exit_full(ModelSpec const& model, SimConfig const& cfg,
                              std::uint64_t trajectory = 0);

/// Same dynamics along a supplied staircase z.
ExitSample simulate_exit_fixed_z(ModelSpec const& model, ChainPath const& z,
                                 SimConfig const& cfg, std::uint64_t trajectory = 0);

/// Coefficients frozen at (λ, k); starts at t = 0.
ExitSample simulate_exit_frozen(ModelSpec const& model, double lambda, int k,
                                SimConfig const& cfg, std::uint64_t trajectory = 0);

/// n trajectories 0..n-1 in parallel; results ordered by index.
std::vector<ExitSample> simulate_batch_full(ModelSpec const& model, SimConfig const& cfg,
                                            std::size_t n);
std::vector<ExitSample> simulate_batch_frozen(ModelSpec const& model, double lambda, int k,
                                              SimConfig const& cfg, std::size_t n);
/// Trajectory i runs along paths[i].
std::vector<ExitSample> simulate_batch_fixed_z(ModelSpec const& model,
                                               std::vector<ChainPath> const& paths,
                                               SimConfig const& cfg);

struct ObservationSummary
{
    double lambda_obs = 0;
    std::size_t n = 0;
    double near_or_exited = 0;      //!< fraction with |X - O| < η or exited
    double interior_or_exited = 0;  //!< fraction in D^η or exited
    double exited = 0;
};

/// Runs frozen (λ, k) or full trajectories and tallies the observation flags.
std::vector<ObservationSummary> summarize_observations(std::vector<ExitSample> const& samples);

struct WilsonInterval
{
    double lo = 0;
    double hi = 0;
};

WilsonInterval wilson_interval(std::size_t hits, std::size_t n, double z = 1.96);

struct TubeLevel
{
    double epsilon = 0;
    std::size_t n = 0;
    std::size_t hits = 0;
    double probability = 0;
    WilsonInterval interval;
    std::optional<double> scaled_log;  //!< ε² ln p̂; empty with zero hits
};

struct TubeEstimate
{
    std::vector<TubeLevel> levels;
    std::optional<double> slope;  //!< least-squares slope of ln p̂ against -1/ε²
    double action = 0;            //!< S of the reference path
};

/*!
 * Direct Monte Carlo of P(sup_t |Y_t - φ(t)| < δ) for the frozen process
 * started at φ(0), with the supremum taken over the Euler grid.
 */
TubeEstimate tube_logprob_estimate(ModelSpec const& model, double lambda, int k,
                                   TimedPath const& phi, double delta,
                                   std::vector<double> const& epsilons, std::size_t n,
                                   std::uint64_t seed, double step = 1e-3);

}  // namespace exitlab
