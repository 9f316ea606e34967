// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "exitlab/model.hpp"
#include "exitlab/rng.hpp"

namespace exitlab {

/*!
 * Right-continuous staircase path of the chain on [0, Λ].
 *
 * states[0] holds on [0, jump_times[0]); states[i] holds on
 * [jump_times[i-1], jump_times[i]).
 */
struct ChainPath
{
    std::vector<double> jump_times;
    std::vector<int> states;

    int state_at(double lambda) const;
    void validate(int n_states) const;
};

/// Gillespie sampling truncated at the horizon.
ChainPath sample_chain_path(ChainSpec const& chain, double horizon, RandomStream& stream);
ChainPath sample_chain_path(ChainSpec const& chain, double horizon, std::uint64_t seed,
                            std::uint64_t trajectory = 0);

struct SigmaOutcome
{
    double sigma = 0;
    int exit_state = 0;
    bool jump_at_threshold = false;  //!< a jump landed exactly on some m^k
};

/// σ^z = inf{λ ≥ 0 : λ ≥ m^{z_λ}} for a fixed staircase.
SigmaOutcome sigma_of_path(ChainPath const& path, std::vector<double> const& m);

struct SigmaAtom
{
    double location = 0;
    double mass = 0;
    std::vector<double> state_mass;  //!< split by the state that dies there
};

/// Continuous part of the law between two consecutive thresholds.
struct SigmaInterval
{
    double lo = 0;
    double hi = 0;
    std::vector<int> alive;
    Eigen::MatrixXd generator_t;      //!< (Q restricted to alive states)ᵀ
    Eigen::VectorXd start;            //!< alive mass vector at lo
    std::vector<double> grid;         //!< snapshot abscissae
    std::vector<double> survival;     //!< total alive mass at grid points
    std::vector<double> density;      //!< -d survival / dλ at grid points
    std::vector<double> absorbed;     //!< mass absorbed into each state over the interval
};

/*!
 * Exact law of (σ, ξ_σ): atoms at the thresholds, a density between them,
 * and exit-state probabilities.
 */
class SigmaLaw
{
  public:
    std::vector<SigmaAtom> atoms;
    std::vector<SigmaInterval> intervals;
    std::vector<double> exit_state_probs;
    double continuous_mass = 0;
    int merged_ties = 0;

    double total_mass() const;
    double support_min() const { return atoms.front().location; }
    double support_max() const { return atoms.back().location; }

    /// P(σ ≤ x) from the interpolated snapshots.
    double cdf(double x) const;
    /// P(σ < x).
    double cdf_left(double x) const;
    /// P(σ ≤ x) by a fresh matrix exponential.
    double cdf_exact(double x) const;
    double density(double x) const;
    double atom_mass_at(double x) const;
};

/// Exact construction; ties among thresholds (within 1e-12) are merged.
SigmaLaw sigma_law(ChainSpec const& chain, std::vector<double> const& m,
                   int snapshots_per_interval = 256);

struct SigmaSample
{
    double sigma = 0;
    int exit_state = 0;
};

/// n independent draws of (σ, ξ_σ) through sampled chain paths.
std::vector<SigmaSample> sample_sigma_mc(ChainSpec const& chain, std::vector<double> const& m,
                                         std::size_t n, std::uint64_t seed);

/// Scaling-and-squaring Padé exponential.
Eigen::MatrixXd matrix_exp(Eigen::MatrixXd const& a);

}  // namespace exitlab
