// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. States are numbered from 1 on the command line and
// in every file written here.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "exitlab/action.hpp"
#include "exitlab/chain.hpp"
#include "exitlab/errors.hpp"
#include "exitlab/harness.hpp"
#include "exitlab/model.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/trap.hpp"

namespace fs = std::filesystem;
using namespace exitlab;
using nlohmann::json;

namespace {

std::vector<double> parse_list(std::string const& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        double v = 0;
        try
        {
            v = std::stod(item, &used);
        }
        catch (std::exception const&)
        {
            throw InputError("cannot parse number '" + item + "'");
        }
        if (used != item.size())
        {
            throw InputError("cannot parse number '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

Vec parse_vec(std::string const& text)
{
    auto const v = parse_list(text);
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out[static_cast<Eigen::Index>(i)] = v[i];
    }
    return out;
}

json vec_json(Vec const& v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

int state_index(ModelSpec const& model, int state)
{
    if (state < 1 || state > model.states())
    {
        throw InputError("--state must be between 1 and " + std::to_string(model.states()));
    }
    return state - 1;
}

void emit_json(json const& j, std::string const& path)
{
    std::string const text = j.dump(2) + "\n";
    if (path.empty() || path == "-")
    {
        std::cout << text;
    }
    else
    {
        write_text_file(path, text);
    }
}

std::string coordinate_header(int dim, std::string const& prefix = "x")
{
    std::string out;
    for (int i = 1; i <= dim; ++i)
    {
        out += (i > 1 ? "," : "") + prefix + std::to_string(i);
    }
    return out;
}

std::string coordinates(Vec const& v, int dim)
{
    std::string out;
    for (int i = 0; i < dim; ++i)
    {
        out += (i ? "," : "") + format_double(i < v.size() ? v[i] : std::nan(""));
    }
    return out;
}

/// Profile path for state k: the path itself for one state, else "<stem>.state<k><ext>".
std::string profile_path(std::string const& base, int k, int states)
{
    if (states == 1)
    {
        return base;
    }
    fs::path p(base);
    std::string const name = p.stem().string() + ".state" + std::to_string(k + 1)
                             + p.extension().string();
    return (p.parent_path() / name).string();
}

json profile_json(ProfilePoint const& p)
{
    return {{"lambda", p.lambda}, {"M", p.value}, {"param", p.param},
            {"point", vec_json(p.point)}, {"ambiguous", p.ambiguous}};
}

//---------------------------------------------------------------------------//

struct Common
{
    std::string model;
    std::string out;
};

int run_quasipotential(Common const& c, std::string const& x, double lambda, int state,
                       int points)
{
    auto const model = load_model(c.model);
    QuasipotentialOptions opts;
    opts.n_points = points;
    auto const r = quasipotential(model, parse_vec(x), lambda, state_index(model, state), opts);
    json path = json::array();
    for (auto const& p : r.path.points)
    {
        path.push_back(vec_json(p));
    }
    emit_json({{"value", r.value},
               {"state", state},
               {"lambda", lambda},
               {"x", vec_json(parse_vec(x))},
               {"minimizer", path},
               {"diagnostics",
                {{"converged", r.converged},
                 {"iterations", r.iterations},
                 {"gradient_norm", r.gradient_norm},
                 {"left_bounding_box", r.left_bounding_box}}}},
              c.out);
    return 0;
}

int run_mk(Common const& c, std::optional<int> state, std::string const& profile)
{
    auto const model = load_model(c.model);
    std::vector<int> states;
    if (state)
    {
        states.push_back(state_index(model, *state));
    }
    else
    {
        for (int k = 0; k < model.states(); ++k)
        {
            states.push_back(k);
        }
    }
    json entries = json::array();
    for (int k : states)
    {
        auto const root = solve_m(model, k);
        json entry = {{"state", k + 1},
                      {"m", root.root},
                      {"M_at_root", root.value_at_root},
                      {"minimizer", vec_json(root.exit_point)},
                      {"param", root.param}};
        json diagnostics = {{"ambiguous", root.ambiguous}, {"grid_points", root.profile.size()}};
        try
        {
            auto const ep = exit_point(model, k, root);
            entry["exit_point"] = vec_json(ep.point);
            json window = json::array();
            for (auto const& p : ep.window)
            {
                window.push_back(profile_json(p));
            }
            diagnostics["window"] = window;
        }
        catch (AmbiguousMinimizerError const& e)
        {
            entry["exit_point"] = nullptr;
            diagnostics["error"] = e.what();
        }
        entry["diagnostics"] = diagnostics;
        entries.push_back(entry);
        if (!profile.empty())
        {
            std::ostringstream csv;
            csv << "lambda,M,param," << coordinate_header(model.dimension) << "\n";
            for (auto const& p : root.profile)
            {
                csv << format_double(p.lambda) << ',' << format_double(p.value) << ','
                    << format_double(p.param) << ',' << coordinates(p.point, model.dimension)
                    << '\n';
            }
            write_text_file(profile_path(profile, k, static_cast<int>(states.size())), csv.str());
        }
    }
    emit_json({{"states", entries}}, c.out);
    return 0;
}

int run_predict(Common const& c)
{
    auto const model = load_model(c.model);
    emit_json(prediction_to_json(predict(model)), c.out);
    return 0;
}

int run_sigma_law(Common const& c, std::string const& mk, std::size_t mc, std::uint64_t seed,
                  int grid_points)
{
    auto const model = load_model(c.model);
    std::vector<double> m;
    if (mk.empty())
    {
        for (int k = 0; k < model.states(); ++k)
        {
            m.push_back(solve_m(model, k).root);
        }
    }
    else
    {
        m = parse_list(mk);
    }
    if (static_cast<int>(m.size()) != model.chain.states())
    {
        throw InputError("--mk needs one value per chain state");
    }
    auto const law = sigma_law(model.chain, m);
    json atoms = json::array();
    for (auto const& a : law.atoms)
    {
        atoms.push_back({{"location", a.location}, {"mass", a.mass}, {"state_mass", a.state_mass}});
    }
    json grid = json::array();
    double const hi = law.support_max();
    int const n = std::max(grid_points, 2);
    for (int i = 0; i < n; ++i)
    {
        double const x = hi * i / (n - 1);
        grid.push_back({{"lambda", x}, {"cdf", x < law.support_min() ? 0.0 : law.cdf(x)}});
    }
    json out = {{"m", m},
                {"atoms", atoms},
                {"continuous_mass", law.continuous_mass},
                {"total_mass", law.total_mass()},
                {"merged_ties", law.merged_ties},
                {"cdf", grid},
                {"exit_state_probs", law.exit_state_probs}};
    if (mc > 0)
    {
        auto const draws = sample_sigma_mc(model.chain, m, mc, seed);
        std::vector<double> sigma;
        std::vector<double> probs(static_cast<std::size_t>(model.chain.states()), 0.0);
        for (auto const& d : draws)
        {
            sigma.push_back(d.sigma);
            probs[static_cast<std::size_t>(d.exit_state)] += 1.0 / static_cast<double>(mc);
        }
        out["mc"] = {{"n", mc}, {"seed", seed}, {"ks", ks_distance(sigma, law)},
                     {"exit_state_probs", probs}};
    }
    emit_json(out, c.out);
    return 0;
}

int run_simulate(Common const& c, SimConfig cfg, std::size_t n, std::string const& observe,
                 std::optional<double> frozen_lambda, int state, std::string const& x0)
{
    auto const model = load_model(c.model);
    if (!observe.empty())
    {
        cfg.observe = parse_list(observe);
    }
    if (!x0.empty())
    {
        cfg.x0 = parse_vec(x0);
    }
    auto const samples = frozen_lambda
                             ? simulate_batch_frozen(model, *frozen_lambda,
                                                     state_index(model, state), cfg, n)
                             : simulate_batch_full(model, cfg, n);
    int const dim = model.dimension;
    std::ostringstream csv;
    csv << "idx,seed,censored,tau,lambda_hat," << coordinate_header(dim, "exit_x")
        << ",exit_state\n";
    for (auto const& s : samples)
    {
        csv << s.idx << ',' << s.seed << ',' << (s.censored ? 1 : 0) << ',' << format_double(s.tau)
            << ',' << format_double(s.lambda_hat) << ',' << coordinates(s.exit_point, dim) << ','
            << s.exit_state + 1 << '\n';
    }
    std::string const out = c.out.empty() ? "samples.csv" : c.out;
    write_text_file(out, csv.str());
    if (!cfg.observe.empty())
    {
        std::ostringstream obs;
        obs << "idx,lambda_obs," << coordinate_header(dim) << ",near_O,exited\n";
        for (auto const& s : samples)
        {
            for (auto const& o : s.observations)
            {
                obs << s.idx << ',' << format_double(o.lambda_obs) << ','
                    << coordinates(o.position, dim) << ',' << (o.near_equilibrium ? 1 : 0) << ','
                    << (o.exited ? 1 : 0) << '\n';
            }
        }
        write_text_file((fs::path(out).parent_path() / "observations.csv").string(), obs.str());
    }
    std::size_t censored = 0;
    for (auto const& s : samples)
    {
        censored += s.censored ? 1 : 0;
    }
    std::cout << json({{"n", n}, {"censored", censored}, {"out", out}}).dump() << "\n";
    return 0;
}

int run_study(Common const& c, StudyOptions options, std::string const& eps)
{
    auto const model = load_model(c.model);
    options.epsilons = parse_list(eps);
    auto const report = run_convergence_study(model, options);
    fs::path const dir = c.out.empty() ? fs::path("report") : fs::path(c.out);
    write_text_file((dir / "summary.json").string(), report_to_json(report).dump(2) + "\n");
    emit_plot_data(report, dir.string());
    write_text_file((dir / "exit_points.csv").string(), exit_points_csv(report));
    for (auto const& level : report.levels)
    {
        std::cout << "eps=" << format_double(level.epsilon);
        if (level.complete)
        {
            std::cout << " ks_median=" << format_double(level.ks_median)
                      << " hit_median=" << format_double(level.hit_median)
                      << " censored=" << level.censored << "\n";
        }
        else
        {
            std::cout << " gap: " << level.gap << "\n";
        }
    }
    for (auto const& v : report.verdicts)
    {
        std::cout << v.name << ": "
                  << (v.passed ? (*v.passed ? "pass" : "FAIL") : "undefined")
                  << (v.low_power ? " (low power)" : "") << "\n";
    }
    return report.passed() ? 0 : 1;
}

int run_check(Common const& c)
{
    auto const model = load_model(c.model);
    auto const inward = check_inward_drift(model);
    auto const confine = check_equilibrium_confinement(model);
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i)
    {
        grid.push_back(model.horizon * i / 10.0);
    }
    auto const attract = check_attraction_time(model, 64, grid);
    auto const coeff = validate_coefficients(model);
    bool const ok = inward.pass && confine.pass && attract.pass && coeff.pass();
    emit_json({{"inward_drift", {{"max", inward.max_value}, {"pass", inward.pass}}},
               {"confinement", {{"max", confine.max_value}, {"pass", confine.pass}}},
               {"attraction", {{"max_entry_time", attract.max_entry_time}, {"pass", attract.pass}}},
               {"coefficients",
                {{"min_eigenvalue", coeff.min_eigenvalue},
                 {"max_eigenvalue", coeff.max_eigenvalue},
                 {"max_drift", coeff.max_drift},
                 {"lipschitz_estimate", coeff.lipschitz_estimate},
                 {"pass", coeff.pass()}}},
               {"pass", ok}},
              c.out);
    return ok ? 0 : 1;
}

TrapProblem load_trap(std::string const& path, std::string const& gamma, std::string const& xstar)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IoError("cannot read " + path);
    }
    json const cfg = json::parse(in);
    if (!cfg.contains("inner") || !cfg.contains("outer"))
    {
        throw InputError("trap geometry needs 'inner' and 'outer' domains");
    }
    TrapProblem p;
    p.inner = make_domain(cfg.at("inner"));
    p.outer = make_domain(cfg.at("outer"));
    std::vector<double> arcs;
    if (!gamma.empty())
    {
        arcs = parse_list(gamma);
    }
    else if (cfg.contains("gamma"))
    {
        for (auto const& a : cfg.at("gamma"))
        {
            arcs.push_back(a.at(0).get<double>());
            arcs.push_back(a.at(1).get<double>());
        }
    }
    if (arcs.size() % 2 != 0)
    {
        throw InputError("γ needs begin,end pairs");
    }
    for (std::size_t i = 0; i < arcs.size(); i += 2)
    {
        p.gamma.push_back({arcs[i], arcs[i + 1]});
    }
    if (!xstar.empty())
    {
        p.x_star = parse_vec(xstar);
    }
    else if (cfg.contains("xstar"))
    {
        p.x_star = parse_vec([&] {
            std::string s;
            for (auto const& v : cfg.at("xstar"))
            {
                s += (s.empty() ? "" : ",") + format_double(v.get<double>());
            }
            return s;
        }());
    }
    return p;
}

int run_trap(std::string const& geometry, std::string const& gamma, std::string const& xstar,
             int resolution, std::string const& out)
{
    auto const problem = load_trap(geometry, gamma, xstar);
    auto const sol = solve_trap(problem, resolution);
    std::ostringstream csv;
    csv << "x,y,u\n";
    int const m = sol.u.n + 1;
    for (int j = 0; j < m; ++j)
    {
        for (int i = 0; i < m; ++i)
        {
            double const v = sol.u.at(i, j);
            if (!std::isnan(v))
            {
                Vec const p = sol.u.node(i, j);
                csv << format_double(p[0]) << ',' << format_double(p[1]) << ','
                    << format_double(v) << '\n';
            }
        }
    }
    std::string const path = out.empty() ? "u.csv" : out;
    write_text_file(path, csv.str());
    json const summary = {{"c", sol.c},
                          {"residual", sol.residual},
                          {"normal_derivative_at_xstar", sol.normal_derivative_at_xstar},
                          {"normal_derivative_v0", sol.normal_derivative_v0},
                          {"normal_derivative_v1", sol.normal_derivative_v1},
                          {"resolution", resolution},
                          {"iterations", sol.u.iterations}};
    fs::path jp(path);
    jp.replace_extension(".json");
    write_text_file(jp.string(), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"exitlab: exit times and exit points of slowly modulated small-noise diffusions"};
    app.require_subcommand(1);

    Common common;
    auto add_model = [&](CLI::App* sub, bool out_required = false) {
        sub->add_option("--model", common.model, "model JSON")->required()->check(CLI::ExistingFile);
        auto* o = sub->add_option("--out", common.out, "output path");
        if (out_required)
        {
            o->required();
        }
    };

    // quasipotential
    auto* qp = app.add_subcommand("quasipotential", "V^{λ,k}(x) by geometric minimum action");
    add_model(qp);
    std::string qp_x;
    double qp_lambda = 0;
    int qp_state = 1;
    int qp_points = 64;
    qp->add_option("--x", qp_x, "target point, comma separated")->required();
    qp->add_option("--lambda", qp_lambda, "slow time λ")->required();
    qp->add_option("--state", qp_state, "chain state (from 1)");
    qp->add_option("--points", qp_points, "path discretization points");

    // mk
    auto* mk = app.add_subcommand("mk", "roots m^k of M^{λ,k} = λ and exit points");
    add_model(mk);
    std::optional<int> mk_state;
    std::string mk_profile;
    mk->add_option("--state", mk_state, "single state (from 1)");
    mk->add_option("--profile", mk_profile, "CSV of the (λ, M) grid");

    // predict
    auto* pr = app.add_subcommand("predict", "predicted law of (σ, ξ_σ) and exit points");
    add_model(pr);

    // sigma-law
    auto* sl = app.add_subcommand("sigma-law", "exact law of σ for given thresholds");
    add_model(sl);
    std::string sl_mk;
    std::size_t sl_mc = 0;
    std::uint64_t sl_seed = 1;
    int sl_grid = 101;
    sl->add_option("--mk", sl_mk, "thresholds m^k, comma separated (default: solve)");
    sl->add_option("--mc", sl_mc, "Monte Carlo cross-check sample size");
    sl->add_option("--seed", sl_seed, "seed for --mc");
    sl->add_option("--grid", sl_grid, "CDF grid points");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Euler-Maruyama exit samples");
    add_model(sim);
    SimConfig sim_cfg;
    std::size_t sim_n = 1000;
    std::string sim_observe;
    std::optional<double> sim_frozen;
    int sim_state = 1;
    std::string sim_x0;
    sim->add_option("--eps", sim_cfg.epsilon, "noise level ε")->required();
    sim->add_option("--n", sim_n, "trajectories");
    sim->add_option("--seed", sim_cfg.seed, "experiment seed");
    sim->add_option("--step", sim_cfg.step, "Euler step h");
    sim->add_option("--eta", sim_cfg.eta, "radius for the near-O flag");
    sim->add_option("--observe", sim_observe, "λ values to record positions at");
    sim->add_option("--frozen-lambda", sim_frozen, "freeze coefficients at this λ");
    sim->add_option("--state", sim_state, "state for --frozen-lambda (from 1)");
    sim->add_option("--x0", sim_x0, "start point (default O)");
    sim->add_option("--max-steps", sim_cfg.max_steps, "per-trajectory step budget");

    // study
    auto* st = app.add_subcommand("study", "convergence study against the prediction");
    add_model(st);
    StudyOptions st_opts;
    std::string st_eps;
    std::optional<double> st_ks;
    std::optional<double> st_hit;
    st->add_option("--eps", st_eps, "descending ε grid")->required();
    st->add_option("--n", st_opts.n, "trajectories per replication");
    st->add_option("--eta", st_opts.eta, "exit-point hit radius");
    st->add_option("--seed", st_opts.seed, "experiment seed");
    st->add_option("--replications", st_opts.replications, "replications per ε");
    st->add_option("--step", st_opts.step, "Euler step h");
    st->add_option("--max-steps", st_opts.max_steps, "per-trajectory step budget");
    st->add_option("--ks-max", st_ks, "also require median KS <= this at the smallest ε");
    st->add_option("--hit-min", st_hit, "also require median hit rate >= this at the smallest ε");

    // check
    auto* ck = app.add_subcommand("check", "sampled checks of the model assumptions");
    add_model(ck);

    // trap
    auto* tr = app.add_subcommand("trap", "exit law through the outer boundary");
    std::string tr_geometry;
    std::string tr_gamma;
    std::string tr_xstar;
    int tr_res = 256;
    std::string tr_out;
    tr->add_option("--geometry", tr_geometry, "JSON with inner/outer domains")
        ->required()
        ->check(CLI::ExistingFile);
    tr->add_option("--gamma", tr_gamma, "arcs of γ as begin,end[,begin,end...]");
    tr->add_option("--xstar", tr_xstar, "point x* on the inner boundary");
    tr->add_option("--res", tr_res, "grid cells per dimension");
    tr->add_option("--out", tr_out, "grid CSV (summary JSON next to it)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*qp)
        {
            return run_quasipotential(common, qp_x, qp_lambda, qp_state, qp_points);
        }
        if (*mk)
        {
            return run_mk(common, mk_state, mk_profile);
        }
        if (*pr)
        {
            return run_predict(common);
        }
        if (*sl)
        {
            return run_sigma_law(common, sl_mk, sl_mc, sl_seed, sl_grid);
        }
        if (*sim)
        {
            return run_simulate(common, sim_cfg, sim_n, sim_observe, sim_frozen, sim_state, sim_x0);
        }
        if (*st)
        {
            st_opts.final_ks_max = st_ks;
            st_opts.final_hit_min = st_hit;
            return run_study(common, st_opts, st_eps);
        }
        if (*ck)
        {
            return run_check(common);
        }
        if (*tr)
        {
            return run_trap(tr_geometry, tr_gamma, tr_xstar, tr_res, tr_out);
        }
    }
    catch (exitlab::Error const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
