// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "exitlab/errors.hpp"
#include "exitlab/parallel.hpp"
#include "exitlab/rng.hpp"

namespace exitlab {

void SimConfig::validate(ModelSpec const& model) const
{
    if (!(epsilon > 0) || epsilon > 10)
    {
        throw InputError("epsilon must be positive");
    }
    if (!(step > 0))
    {
        throw InputError("step size must be positive");
    }
    if (x0.size() != 0 && x0.size() != model.dimension)
    {
        throw InputError("x0 has the wrong dimension");
    }
    if (x0.size() != 0 && model.domain->level(x0) > 1e-12)
    {
        throw InputError("x0 lies outside the closed domain");
    }
    double const lambda_max = horizon > 0 ? horizon : model.horizon;
    for (double obs : observe)
    {
        if (!(obs > 0) || obs >= lambda_max)
        {
            throw InputError("observation λ values must lie in (0, Λ)");
        }
    }
    if (!(eta > 0))
    {
        throw InputError("eta must be positive");
    }
}

namespace {

/// Piecewise-constant chain state and time convention of one run.
struct Schedule
{
    double t0 = 0;
    double t_end = 0;
    bool slow_time = true;  //!< λ = ε² ln t; otherwise frozen_lambda
    double frozen_lambda = 0;
    std::vector<double> switch_times;
    std::vector<int> states;
};

ExitSample run_trajectory(ModelSpec const& model, SimConfig const& cfg, Schedule const& plan,
                          std::uint64_t trajectory)
{
    int const d = model.dimension;
    double const eps = cfg.epsilon;
    double const eps2 = eps * eps;
    double const lambda_max = cfg.horizon > 0 ? cfg.horizon : model.horizon;
    auto const& domain = *model.domain;
    Vec const& origin = model.equilibrium;

    ExitSample out;
    out.idx = trajectory;
    out.seed = cfg.seed;
    out.exit_point = Vec::Constant(d, std::numeric_limits<double>::quiet_NaN());

    auto scaled = [&](double t) {
        return t > 0 ? eps2 * std::log(t) : -std::numeric_limits<double>::infinity();
    };

    // Observation times sorted, results kept in the caller's order.
    std::vector<std::size_t> obs_order(cfg.observe.size());
    std::iota(obs_order.begin(), obs_order.end(), 0);
    std::sort(obs_order.begin(), obs_order.end(),
              [&](auto a, auto b) { return cfg.observe[a] < cfg.observe[b]; });
    std::vector<double> obs_times;
    for (auto i : obs_order)
    {
        obs_times.push_back(std::exp(cfg.observe[i] / eps2));
    }
    out.observations.resize(cfg.observe.size());
    std::size_t next_obs = 0;

    auto record = [&](std::size_t slot, Vec const& x, bool exited) {
        Observation& o = out.observations[slot];
        o.lambda_obs = cfg.observe[slot];
        o.position = x;
        o.exited = exited;
        o.near_equilibrium = !exited && (x - origin).norm() < cfg.eta;
        o.in_interior = !exited && domain.distance_to_boundary(x) >= cfg.eta;
    };

    Vec x = cfg.x0.size() ? cfg.x0 : origin;
    double t = plan.t0;
    std::size_t next_switch = 0;
    int k = plan.states.front();
    double g = domain.level(x);

    auto finish_exit = [&](Vec const& point, double tau) {
        out.tau = tau;
        out.lambda_hat = scaled(tau);
        out.exit_point = point;
        out.exit_state = k;
        for (; next_obs < obs_order.size(); ++next_obs)
        {
            record(obs_order[next_obs], point, true);
        }
        return out;
    };

    if (g >= 0)
    {
        return finish_exit(x, t);
    }

    RandomStream wiener(cfg.seed, trajectory, Substream::wiener);
    auto const& coeff = model.coefficients;
    bool const cache_sigma = !plan.slow_time;
    Mat sigma_cache;
    int sigma_state = -1;

    Vec noise(d);
    while (true)
    {
        double next_event = plan.t_end;
        if (next_switch < plan.switch_times.size())
        {
            next_event = std::min(next_event, plan.switch_times[next_switch]);
        }
        if (next_obs < obs_times.size())
        {
            next_event = std::min(next_event, obs_times[next_obs]);
        }
        double const dt = std::min(cfg.step, next_event - t);

        if (dt > 0)
        {
            double const lambda = plan.slow_time ? scaled(t) : plan.frozen_lambda;
            auto const& c = coeff[static_cast<std::size_t>(k)];
            Vec const b = c.drift(x, lambda);
            for (int i = 0; i < d; ++i)
            {
                noise[i] = wiener.normal();
            }
            Vec x_new;
            double const scale = eps * std::sqrt(dt);
            if (cache_sigma && c.sigma_constant_in_x)
            {
                if (sigma_state != k)
                {
                    sigma_cache = c.sigma(x, lambda);
                    sigma_state = k;
                }
                x_new = x + b * dt + scale * (sigma_cache * noise);
            }
            else
            {
                x_new = x + b * dt + scale * (c.sigma(x, lambda) * noise);
            }
            if (++out.steps > cfg.max_steps)
            {
                throw BudgetError("trajectory " + std::to_string(trajectory)
                                      + " exceeded the step budget",
                                  out.steps, t, scaled(t));
            }
            double const g_new = domain.level(x_new);
            if (g_new >= 0)
            {
                double const theta = g / (g - g_new);
                return finish_exit(x + theta * (x_new - x), t + theta * dt);
            }
            x = x_new;
            g = g_new;
            t += dt;
            if (next_event - t <= 1e-12 * std::max(1.0, t))
            {
                t = next_event;
            }
        }
        else
        {
            t = next_event;
        }

        while (next_switch < plan.switch_times.size() && plan.switch_times[next_switch] <= t)
        {
            ++next_switch;
            k = plan.states[next_switch];
        }
        while (next_obs < obs_times.size() && obs_times[next_obs] <= t)
        {
            record(obs_order[next_obs], x, false);
            ++next_obs;
        }
        if (t >= plan.t_end)
        {
            out.censored = true;
            out.tau = plan.t_end;
            out.lambda_hat = lambda_max;
            out.exit_state = k;
            return out;
        }
    }
}

Schedule slow_schedule(ModelSpec const& model, SimConfig const& cfg, ChainPath const& z)
{
    z.validate(model.states());
    double const eps2 = cfg.epsilon * cfg.epsilon;
    double const lambda_max = cfg.horizon > 0 ? cfg.horizon : model.horizon;
    Schedule plan;
    plan.t0 = 1.0;
    plan.t_end = std::exp(lambda_max / eps2);
    plan.slow_time = true;
    plan.states.push_back(z.states.front());
    for (std::size_t i = 0; i < z.jump_times.size(); ++i)
    {
        if (z.jump_times[i] >= lambda_max)
        {
            break;
        }
        plan.switch_times.push_back(std::exp(z.jump_times[i] / eps2));
        plan.states.push_back(z.states[i + 1]);
    }
    return plan;
}

}  // namespace

ExitSample simulate_exit_fixed_z(ModelSpec const& model, ChainPath const& z,
                                 SimConfig const& cfg, std::uint64_t trajectory)
{
    cfg.validate(model);
    return run_trajectory(model, cfg, slow_schedule(model, cfg, z), trajectory);
}

ExitSample simulate_exit_full(ModelSpec const& model, SimConfig const& cfg,
                              std::uint64_t trajectory)
{
    cfg.validate(model);
    double const lambda_max = cfg.horizon > 0 ? cfg.horizon : model.horizon;
    // Chain randomness comes only from its own substream.
    auto const z = sample_chain_path(model.chain, lambda_max, cfg.seed, trajectory);
    return run_trajectory(model, cfg, slow_schedule(model, cfg, z), trajectory);
}

ExitSample simulate_exit_frozen(ModelSpec const& model, double lambda, int k,
                                SimConfig const& cfg, std::uint64_t trajectory)
{
    cfg.validate(model);
    if (k < 0 || k >= model.states())
    {
        throw InputError("state index out of range");
    }
    double const lambda_max = cfg.horizon > 0 ? cfg.horizon : model.horizon;
    Schedule plan;
    plan.t0 = 0.0;
    plan.t_end = std::exp(lambda_max / (cfg.epsilon * cfg.epsilon));
    plan.slow_time = false;
    plan.frozen_lambda = lambda;
    plan.states = {k};
    return run_trajectory(model, cfg, plan, trajectory);
}

std::vector<ExitSample> simulate_batch_full(ModelSpec const& model, SimConfig const& cfg,
                                            std::size_t n)
{
    cfg.validate(model);
    std::vector<ExitSample> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = simulate_exit_full(model, cfg, i); });
    return out;
}

std::vector<ExitSample> simulate_batch_frozen(ModelSpec const& model, double lambda, int k,
                                              SimConfig const& cfg, std::size_t n)
{
    cfg.validate(model);
    std::vector<ExitSample> out(n);
    parallel_for(n,
                 [&](std::size_t i) { out[i] = simulate_exit_frozen(model, lambda, k, cfg, i); });
    return out;
}

std::vector<ExitSample> simulate_batch_fixed_z(ModelSpec const& model,
                                               std::vector<ChainPath> const& paths,
                                               SimConfig const& cfg)
{
    cfg.validate(model);
    std::vector<ExitSample> out(paths.size());
    parallel_for(paths.size(),
                 [&](std::size_t i) { out[i] = simulate_exit_fixed_z(model, paths[i], cfg, i); });
    return out;
}

std::vector<ObservationSummary> summarize_observations(std::vector<ExitSample> const& samples)
{
    std::vector<ObservationSummary> out;
    if (samples.empty())
    {
        return out;
    }
    out.resize(samples.front().observations.size());
    for (auto const& s : samples)
    {
        for (std::size_t j = 0; j < out.size() && j < s.observations.size(); ++j)
        {
            auto const& o = s.observations[j];
            auto& sum = out[j];
            sum.lambda_obs = o.lambda_obs;
            sum.n += 1;
            sum.near_or_exited += (o.near_equilibrium || o.exited) ? 1.0 : 0.0;
            sum.interior_or_exited += (o.in_interior || o.exited) ? 1.0 : 0.0;
            sum.exited += o.exited ? 1.0 : 0.0;
        }
    }
    for (auto& sum : out)
    {
        if (sum.n > 0)
        {
            double const n = static_cast<double>(sum.n);
            sum.near_or_exited /= n;
            sum.interior_or_exited /= n;
            sum.exited /= n;
        }
    }
    return out;
}

WilsonInterval wilson_interval(std::size_t hits, std::size_t n, double z)
{
    if (n == 0)
    {
        return {0.0, 1.0};
    }
    double const nn = static_cast<double>(n);
    double const p = static_cast<double>(hits) / nn;
    double const z2 = z * z;
    double const centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
    double const half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

TubeEstimate tube_logprob_estimate(ModelSpec const& model, double lambda, int k,
                                   TimedPath const& phi, double delta,
                                   std::vector<double> const& epsilons, std::size_t n,
                                   std::uint64_t seed, double step)
{
    if (phi.points.size() < 2 || phi.times.size() != phi.points.size())
    {
        throw InputError("reference path needs matching times and at least 2 points");
    }
    if (!(delta > 0) || !(step > 0) || n == 0)
    {
        throw InputError("tube estimate needs delta > 0, step > 0 and n >= 1");
    }
    TubeEstimate estimate;
    estimate.action = action_of_path(model, phi, lambda, k);

    double const t0 = phi.times.front();
    double const t_end = phi.times.back();
    auto const steps = static_cast<std::size_t>(std::ceil((t_end - t0) / step - 1e-9));
    double const dt = (t_end - t0) / static_cast<double>(steps);
    // Reference path at the Euler grid times.
    std::vector<Vec> reference(steps + 1);
    std::size_t seg = 0;
    for (std::size_t j = 0; j <= steps; ++j)
    {
        double const t = j == steps ? t_end : t0 + dt * static_cast<double>(j);
        while (seg + 2 < phi.times.size() && phi.times[seg + 1] < t)
        {
            ++seg;
        }
        double const w = (t - phi.times[seg]) / (phi.times[seg + 1] - phi.times[seg]);
        reference[j] = phi.points[seg] + w * (phi.points[seg + 1] - phi.points[seg]);
    }

    int const d = model.dimension;
    auto const& c = model.coefficients.at(static_cast<std::size_t>(k));
    for (std::size_t level = 0; level < epsilons.size(); ++level)
    {
        double const eps = epsilons[level];
        std::uint64_t const level_seed = derive_seed(seed, 0x7475be, level);
        std::vector<unsigned char> hit(n, 0);
        parallel_for(n, [&](std::size_t i) {
            RandomStream wiener(level_seed, i, Substream::wiener);
            Vec x = reference.front();
            Vec noise(d);
            double const scale = eps * std::sqrt(dt);
            for (std::size_t j = 1; j <= steps; ++j)
            {
                for (int a = 0; a < d; ++a)
                {
                    noise[a] = wiener.normal();
                }
                x = x + c.drift(x, lambda) * dt + scale * (c.sigma(x, lambda) * noise);
                if ((x - reference[j]).norm() >= delta)
                {
                    return;
                }
            }
            hit[i] = 1;
        });
        TubeLevel out;
        out.epsilon = eps;
        out.n = n;
        out.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
        out.probability = static_cast<double>(out.hits) / static_cast<double>(n);
        out.interval = wilson_interval(out.hits, n);
        if (out.hits > 0)
        {
            out.scaled_log = eps * eps * std::log(out.probability);
        }
        estimate.levels.push_back(out);
    }

    std::vector<double> xs;
    std::vector<double> ys;
    for (auto const& lv : estimate.levels)
    {
        if (lv.hits > 0)
        {
            xs.push_back(-1.0 / (lv.epsilon * lv.epsilon));
            ys.push_back(std::log(lv.probability));
        }
    }
    if (xs.size() >= 2)
    {
        double const mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double const my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
        double sxy = 0;
        double sxx = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
        {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
        }
        if (sxx > 0)
        {
            estimate.slope = sxy / sxx;
        }
    }
    return estimate;
}

}  // namespace exitlab
