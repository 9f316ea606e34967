// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

#include "exitlab/errors.hpp"
#include "exitlab/parallel.hpp"

namespace exitlab {

Eigen::MatrixXd matrix_exp(Eigen::MatrixXd const& a)
{
    return a.exp();
}

int ChainPath::state_at(double lambda) const
{
    auto const it = std::upper_bound(jump_times.begin(), jump_times.end(), lambda);
    return states[static_cast<std::size_t>(it - jump_times.begin())];
}

void ChainPath::validate(int n_states) const
{
    if (states.size() != jump_times.size() + 1)
    {
        throw InputError("chain path needs one more state than jump times");
    }
    for (std::size_t i = 0; i < states.size(); ++i)
    {
        if (states[i] < 0 || states[i] >= n_states)
        {
            throw InputError("chain path state out of range");
        }
        if (i > 0 && states[i] == states[i - 1])
        {
            throw InputError("chain path has a jump to the same state");
        }
    }
    for (std::size_t i = 0; i < jump_times.size(); ++i)
    {
        if (!(jump_times[i] > (i == 0 ? 0.0 : jump_times[i - 1])))
        {
            throw InputError("chain path jump times must be positive and increasing");
        }
    }
}

namespace {

int draw_index(Eigen::VectorXd const& weights, double total, double u)
{
    double acc = 0;
    double const target = u * total;
    int last = -1;
    for (int i = 0; i < weights.size(); ++i)
    {
        if (weights[i] <= 0)
        {
            continue;
        }
        last = i;
        acc += weights[i];
        if (target < acc)
        {
            return i;
        }
    }
    return last;
}

}  // namespace

ChainPath sample_chain_path(ChainSpec const& chain, double horizon, RandomStream& stream)
{
    ChainPath path;
    auto const& q = chain.generator;
    int state = draw_index(chain.initial, chain.initial.sum(), stream.uniform());
    path.states.push_back(state);
    double t = 0;
    while (true)
    {
        double const rate = -q(state, state);
        if (!(rate > 0))
        {
            break;  // absorbing
        }
        t += stream.exponential(rate);
        if (t > horizon)
        {
            break;
        }
        Eigen::VectorXd weights = q.row(state).transpose();
        weights[state] = 0;
        state = draw_index(weights, rate, stream.uniform());
        path.jump_times.push_back(t);
        path.states.push_back(state);
    }
    return path;
}

ChainPath sample_chain_path(ChainSpec const& chain, double horizon, std::uint64_t seed,
                            std::uint64_t trajectory)
{
    RandomStream stream(seed, trajectory, Substream::chain);
    return sample_chain_path(chain, horizon, stream);
}

SigmaOutcome sigma_of_path(ChainPath const& path, std::vector<double> const& m)
{
    SigmaOutcome out;
    for (double t : path.jump_times)
    {
        for (double mk : m)
        {
            if (t == mk)
            {
                out.jump_at_threshold = true;
            }
        }
    }
    for (std::size_t i = 0; i < path.states.size(); ++i)
    {
        double const a = i == 0 ? 0.0 : path.jump_times[i - 1];
        double const b = i < path.jump_times.size() ? path.jump_times[i]
                                                     : std::numeric_limits<double>::infinity();
        int const k = path.states[i];
        double const mk = m.at(static_cast<std::size_t>(k));
        if (mk < b)
        {
            out.sigma = std::max(a, mk);
            out.exit_state = k;
            return out;
        }
    }
    // Unreachable: the last holding interval is unbounded.
    throw InputError("staircase never leaves G");
}

//---------------------------------------------------------------------------//
// Exact law
//---------------------------------------------------------------------------//

double SigmaLaw::total_mass() const
{
    double total = continuous_mass;
    for (auto const& atom : atoms)
    {
        total += atom.mass;
    }
    return total;
}

double SigmaLaw::atom_mass_at(double x) const
{
    for (auto const& atom : atoms)
    {
        if (atom.location == x)
        {
            return atom.mass;
        }
    }
    return 0.0;
}

namespace {

/// Cubic Hermite interpolation of the survival snapshots.
double hermite_survival(SigmaInterval const& iv, double x)
{
    auto const& g = iv.grid;
    auto it = std::upper_bound(g.begin(), g.end(), x);
    std::size_t j = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    j = std::min(j, g.size() - 2);
    double const h = g[j + 1] - g[j];
    double const t = (x - g[j]) / h;
    double const t2 = t * t;
    double const t3 = t2 * t;
    double const h00 = 2 * t3 - 3 * t2 + 1;
    double const h10 = t3 - 2 * t2 + t;
    double const h01 = -2 * t3 + 3 * t2;
    double const h11 = t3 - t2;
    // Survival slope is minus the density.
    return h00 * iv.survival[j] - h10 * h * iv.density[j] + h01 * iv.survival[j + 1]
           - h11 * h * iv.density[j + 1];
}

double hermite_density(SigmaInterval const& iv, double x)
{
    auto const& g = iv.grid;
    auto it = std::upper_bound(g.begin(), g.end(), x);
    std::size_t j = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    j = std::min(j, g.size() - 2);
    double const h = g[j + 1] - g[j];
    double const t = (x - g[j]) / h;
    return (1 - t) * iv.density[j] + t * iv.density[j + 1];
}

}  // namespace

double SigmaLaw::cdf(double x) const
{
    if (atoms.empty() || x < atoms.front().location)
    {
        return 0.0;
    }
    if (x >= atoms.back().location)
    {
        return 1.0;
    }
    for (auto const& iv : intervals)
    {
        if (x >= iv.lo && x < iv.hi)
        {
            return std::clamp(1.0 - hermite_survival(iv, x), 0.0, 1.0);
        }
    }
    return 1.0;
}

double SigmaLaw::cdf_left(double x) const
{
    return std::max(0.0, cdf(x) - atom_mass_at(x));
}

double SigmaLaw::cdf_exact(double x) const
{
    if (atoms.empty() || x < atoms.front().location)
    {
        return 0.0;
    }
    if (x >= atoms.back().location)
    {
        return 1.0;
    }
    for (auto const& iv : intervals)
    {
        if (x >= iv.lo && x < iv.hi)
        {
            Eigen::VectorXd const p = matrix_exp((x - iv.lo) * iv.generator_t) * iv.start;
            return std::clamp(1.0 - p.sum(), 0.0, 1.0);
        }
    }
    return 1.0;
}

double SigmaLaw::density(double x) const
{
    for (auto const& iv : intervals)
    {
        if (x >= iv.lo && x < iv.hi)
        {
            return hermite_density(iv, x);
        }
    }
    return 0.0;
}

SigmaLaw sigma_law(ChainSpec const& chain, std::vector<double> const& m,
                   int snapshots_per_interval)
{
    chain.validate();
    int const s = chain.states();
    if (static_cast<int>(m.size()) != s)
    {
        throw InputError("need one threshold per chain state");
    }
    if (snapshots_per_interval < 2)
    {
        throw InputError("need at least 2 snapshots per interval");
    }
    for (double mk : m)
    {
        if (!(mk > 0) || !std::isfinite(mk))
        {
            throw InputError("thresholds must be positive and finite");
        }
    }

    SigmaLaw law;
    law.exit_state_probs.assign(static_cast<std::size_t>(s), 0.0);

    // Distinct thresholds; near-equal values collapse onto the first.
    std::vector<double> sorted(m);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> levels;
    for (double v : sorted)
    {
        if (!levels.empty() && v - levels.back() <= 1e-12)
        {
            ++law.merged_ties;
            continue;
        }
        levels.push_back(v);
    }
    auto level_of = [&](int k) {
        double const mk = m[static_cast<std::size_t>(k)];
        std::size_t best = 0;
        for (std::size_t i = 0; i < levels.size(); ++i)
        {
            if (std::abs(levels[i] - mk) < std::abs(levels[best] - mk))
            {
                best = i;
            }
        }
        return best;
    };

    Eigen::MatrixXd const q = chain.generator;
    Eigen::VectorXd mass = matrix_exp(levels.front() * q.transpose()) * chain.initial;
    std::vector<int> alive(static_cast<std::size_t>(s));
    std::iota(alive.begin(), alive.end(), 0);

    for (std::size_t li = 0; li < levels.size(); ++li)
    {
        // Deposit the atom of states whose deadline is this level.
        SigmaAtom atom;
        atom.location = levels[li];
        atom.state_mass.assign(static_cast<std::size_t>(s), 0.0);
        std::vector<int> survivors;
        for (int k : alive)
        {
            if (level_of(k) == li)
            {
                double const pk = std::max(0.0, mass[k]);
                atom.state_mass[static_cast<std::size_t>(k)] = pk;
                atom.mass += pk;
                law.exit_state_probs[static_cast<std::size_t>(k)] += pk;
                mass[k] = 0;
            }
            else
            {
                survivors.push_back(k);
            }
        }
        law.atoms.push_back(std::move(atom));
        alive = std::move(survivors);
        if (li + 1 == levels.size())
        {
            break;
        }

        SigmaInterval iv;
        iv.lo = levels[li];
        iv.hi = levels[li + 1];
        iv.alive = alive;
        auto const n_alive = static_cast<Eigen::Index>(alive.size());
        Eigen::MatrixXd sub(n_alive, n_alive);
        iv.start.resize(n_alive);
        for (Eigen::Index a = 0; a < n_alive; ++a)
        {
            iv.start[a] = mass[alive[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < n_alive; ++b)
            {
                sub(a, b) = q(alive[static_cast<std::size_t>(b)], alive[static_cast<std::size_t>(a)]);
            }
        }
        iv.generator_t = sub;
        double const length = iv.hi - iv.lo;

        // ∫ exp(u Aᵀ) du over the interval from the augmented exponential.
        Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n_alive, 2 * n_alive);
        aug.topLeftCorner(n_alive, n_alive) = sub * length;
        aug.topRightCorner(n_alive, n_alive) = Eigen::MatrixXd::Identity(n_alive, n_alive) * length;
        Eigen::MatrixXd const big = matrix_exp(aug);
        Eigen::VectorXd const occupation = big.topRightCorner(n_alive, n_alive) * iv.start;
        Eigen::VectorXd const end = big.topLeftCorner(n_alive, n_alive) * iv.start;

        // Exit rate of each alive state into dead states.
        Eigen::VectorXd kill_rate = Eigen::VectorXd::Zero(n_alive);
        iv.absorbed.assign(static_cast<std::size_t>(s), 0.0);
        for (Eigen::Index a = 0; a < n_alive; ++a)
        {
            int const from = alive[static_cast<std::size_t>(a)];
            for (int to = 0; to < s; ++to)
            {
                if (to == from || std::find(alive.begin(), alive.end(), to) != alive.end())
                {
                    continue;
                }
                kill_rate[a] += q(from, to);
                double const flow = q(from, to) * occupation[a];
                iv.absorbed[static_cast<std::size_t>(to)] += flow;
                law.exit_state_probs[static_cast<std::size_t>(to)] += flow;
                law.continuous_mass += flow;
            }
        }

        // Snapshots for the interpolated CDF.
        int const n_snap = snapshots_per_interval;
        Eigen::MatrixXd const step = matrix_exp(sub * (length / (n_snap - 1)));
        Eigen::VectorXd p = iv.start;
        for (int j = 0; j < n_snap; ++j)
        {
            iv.grid.push_back(j + 1 == n_snap ? iv.hi : iv.lo + length * j / (n_snap - 1));
            iv.survival.push_back(p.sum());
            iv.density.push_back(kill_rate.dot(p));
            p = step * p;
        }
        // Carry the exact endpoint forward rather than the stepped snapshot.
        for (Eigen::Index a = 0; a < n_alive; ++a)
        {
            mass[alive[static_cast<std::size_t>(a)]] = end[a];
        }
        law.intervals.push_back(std::move(iv));
    }
    return law;
}

std::vector<SigmaSample> sample_sigma_mc(ChainSpec const& chain, std::vector<double> const& m,
                                         std::size_t n, std::uint64_t seed)
{
    if (n == 0)
    {
        throw InputError("sample_sigma_mc needs n >= 1");
    }
    chain.validate();
    double const horizon = *std::max_element(m.begin(), m.end());
    std::vector<SigmaSample> out(n);
    parallel_for(n, [&](std::size_t i) {
        auto const path = sample_chain_path(chain, horizon, seed, i);
        auto const outcome = sigma_of_path(path, m);
        out[i] = {outcome.sigma, outcome.exit_state};
    });
    return out;
}

}  // namespace exitlab
