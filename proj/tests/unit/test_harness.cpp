// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "exitlab/errors.hpp"
#include "exitlab/harness.hpp"
#include "exitlab/rng.hpp"
#include "fixtures.hpp"

using namespace exitlab;
using exitlab::test::radial_model;

namespace {

/// Unit disk, O = (0.2, 0), b_k = -β_k (x - O); M^k ≡ 0.64 β_k gives m = (0.3, 0.6)
/// with both exit points at (1, 0).
ModelSpec two_state(double q = 1.0, double horizon = 1.0)
{
    nlohmann::json cfg = {
        {"dimension", 2},
        {"states", 2},
        {"drift",
         {{{"kind", "radial_decay"}, {"beta0", 0.3 / 0.64}},
          {{"kind", "radial_decay"}, {"beta0", 0.6 / 0.64}}}},
        {"domain", {{"kind", "ball"}, {"radius", 1.0}, {"center", {0.0, 0.0}}}},
        {"O", {0.2, 0.0}},
        {"c", 0.1},
        {"r", 0.1},
        {"Q", {-q, q, q, -q}},
        {"pi0", {1.0, 0.0}},
        {"Lambda", horizon},
    };
    return model_from_json(cfg);
}

/// Off-centre single-state model: M ≡ 0.32 with the exit point at (1, 0).
ModelSpec shifted(double horizon = 1.0)
{
    return radial_model(0.5, 0.0, 0.2, 0.0, 0.1, 0.1, horizon);
}

ExitSample exit_at(Vec const& x, int state = 0)
{
    ExitSample s;
    s.exit_point = x;
    s.exit_state = state;
    s.lambda_hat = 0.5;
    return s;
}

Prediction one_point(Vec const& x)
{
    Prediction p;
    p.states.push_back({0, 0.5, 0.5, 0.0, x});
    p.exit_probs = {1.0};
    return p;
}

}  // namespace

TEST_CASE("predict composes roots, exit points and the sigma law")
{
    SUBCASE("single state")
    {
        auto const p = predict(shifted());
        REQUIRE(p.states.size() == 1);
        CHECK(p.states[0].m == doctest::Approx(0.32).epsilon(1e-3));
        CHECK(p.states[0].exit_point[0] == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(std::abs(p.states[0].exit_point[1]) < 1e-3);
        REQUIRE(p.law.atoms.size() == 1);
        CHECK(p.law.atoms[0].location == p.states[0].m);
        CHECK(p.law.atoms[0].mass == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.exit_probs[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("two states")
    {
        auto const model = two_state();
        auto const p = predict(model);
        CHECK(p.states[0].m == doctest::Approx(0.3).epsilon(1e-3));
        CHECK(p.states[1].m == doctest::Approx(0.6).epsilon(1e-3));
        // Closed-form masses at exactly m = (0.3, 0.6); roots carry 1e-4 error.
        auto const exact = sigma_law(model.chain, {0.3, 0.6});
        REQUIRE(p.law.atoms.size() == 2);
        CHECK(p.law.atoms[0].mass == doctest::Approx(0.7744058180470133).epsilon(1e-3));
        CHECK(p.law.atoms[1].mass == doctest::Approx(0.16712428047055938).epsilon(2e-3));
        CHECK(p.exit_probs[0] == doctest::Approx(exact.exit_state_probs[0]).epsilon(1e-3));
        double sum = 0;
        for (double w : p.exit_probs)
        {
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
        for (auto const& s : p.states)
        {
            CHECK(std::abs(model.domain->level(s.exit_point)) < 1e-8);
        }
    }
    SUBCASE("symmetric model has no unique exit point")
    {
        CHECK_THROWS_AS(predict(radial_model(0.5)), AmbiguousMinimizerError);
    }
    SUBCASE("deterministic")
    {
        auto const model = two_state();
        CHECK(prediction_to_json(predict(model)).dump() == prediction_to_json(predict(model)).dump());
    }
}

TEST_CASE("KS distance against laws with atoms")
{
    auto const single = sigma_law(shifted().chain, {0.32});
    CHECK(ks_distance(std::vector<double>(50, 0.32), single) == 0.0);
    CHECK(ks_distance(std::vector<double>(50, 0.2), single) == 1.0);
    CHECK(ks_distance(std::vector<double>(50, 0.5), single) == 1.0);

    // Half censored: the right tail contributes 1/2.
    std::vector<double> half(10, 0.32);
    half.resize(20, std::numeric_limits<double>::infinity());
    CHECK(ks_distance(half, single) == doctest::Approx(0.5));

    CHECK_THROWS_AS(ks_distance({std::numeric_limits<double>::infinity()}, single), InputError);

    SUBCASE("two-atom law, exact draws")
    {
        // Absorbing second state: no continuous part, atom 0.7744 at 0.3.
        double const q = -std::log(0.7744058180470133) / 0.3;
        ChainSpec chain;
        chain.generator = Eigen::MatrixXd{{-q, q}, {0.0, 0.0}};
        chain.initial = Eigen::VectorXd{{1.0, 0.0}};
        auto const law = sigma_law(chain, {0.3, 0.6});
        CHECK(law.atoms[0].mass == doctest::Approx(0.7744058180470133).epsilon(1e-12));
        CHECK(law.continuous_mass < 1e-12);
        RandomStream rng(4, 0, Substream::sampling);
        std::vector<double> draws;
        for (int i = 0; i < 100000; ++i)
        {
            draws.push_back(rng.uniform() < law.atoms[0].mass ? 0.3 : 0.6);
        }
        CHECK(ks_distance(draws, law) <= 0.01);
    }
    SUBCASE("DKW check on the mixed two-state law")
    {
        auto const model = two_state();
        auto const law = sigma_law(model.chain, {0.3, 0.6});
        std::vector<double> draws;
        for (auto const& s : sample_sigma_mc(model.chain, {0.3, 0.6}, 10000, 21))
        {
            draws.push_back(s.sigma);
        }
        CHECK(ks_distance(draws, law) <= 1.36 / std::sqrt(1e4) + 0.005);
        // A shifted sample set is far away.
        for (double& d : draws)
        {
            d += 0.05;
        }
        CHECK(ks_distance(draws, law) > 0.5);
    }
}

TEST_CASE("exit point statistics")
{
    Vec const x1 = make_vec({1.0, 0.0});
    SUBCASE("all exits at the predicted point")
    {
        std::vector<ExitSample> s(20, exit_at(x1));
        auto const st = exit_point_stats(s, one_point(x1), 0.2);
        CHECK(st.hit_rate == 1.0);
        CHECK(st.agreement == 1.0);
    }
    SUBCASE("uniform on the circle")
    {
        std::vector<ExitSample> s;
        int const n = 200000;
        for (int i = 0; i < n; ++i)
        {
            double const t = 2 * std::numbers::pi * (i + 0.5) / n;
            s.push_back(exit_at(make_vec({std::cos(t), std::sin(t)})));
        }
        auto const st = exit_point_stats(s, one_point(x1), 0.2);
        // Fraction of the unit circle within chord 0.2 of (1,0): 2 asin(0.1)/π.
        CHECK(st.hit_rate == doctest::Approx(0.06376856085851985).epsilon(1e-4));
        CHECK(exit_point_stats(s, one_point(x1), 2.0).hit_rate == 1.0);
    }
    SUBCASE("censored runs are skipped")
    {
        std::vector<ExitSample> s(3, exit_at(x1));
        s[1].censored = true;
        s[1].exit_point = make_vec({std::nan(""), std::nan("")});
        auto const st = exit_point_stats(s, one_point(x1), 0.2);
        CHECK(st.uncensored == 2);
        CHECK(st.hit_rate == 1.0);
        CHECK_THROWS_AS(exit_point_stats(s, one_point(x1), 0.0), InputError);
    }
    SUBCASE("confusion table")
    {
        Prediction p = one_point(x1);
        p.states.push_back({1, 0.6, 0.6, 0.0, make_vec({-1.0, 0.0})});
        std::vector<ExitSample> s{exit_at(x1, 0), exit_at(make_vec({-1.0, 0.0}), 1),
                                  exit_at(make_vec({-1.0, 0.0}), 0)};
        auto const st = exit_point_stats(s, p, 0.2);
        CHECK(st.confusion[0][0] == 1);
        CHECK(st.confusion[0][1] == 1);
        CHECK(st.confusion[1][1] == 1);
        CHECK(st.agreement == doctest::Approx(2.0 / 3.0));
        CHECK(st.hit_rate == doctest::Approx(2.0 / 3.0));
    }
}

TEST_CASE("convergence study bookkeeping")
{
    auto const model = shifted();
    SUBCASE("single observation per level is low power")
    {
        StudyOptions o;
        o.epsilons = {0.6, 0.5};
        o.n = 1;
        auto const r = run_convergence_study(model, o);
        CHECK(r.low_power);
        REQUIRE(r.levels.size() == 2);
        for (auto const& v : r.verdicts)
        {
            CHECK(v.low_power);
        }
    }
    SUBCASE("one ε: trends undefined")
    {
        StudyOptions o;
        o.epsilons = {0.5};
        o.n = 50;
        auto const r = run_convergence_study(model, o);
        CHECK_FALSE(r.trends_defined);
        for (auto const& v : r.verdicts)
        {
            CHECK_FALSE(v.passed.has_value());
        }
        CHECK(r.levels[0].replications.size() == 5);
        CHECK(r.levels[0].ks_median >= 0.0);
        CHECK(r.levels[0].ks_median <= 1.0);
        CHECK(r.passed());
    }
    SUBCASE("budget exhaustion leaves a gap")
    {
        StudyOptions o;
        o.epsilons = {0.6, 0.3};
        o.n = 20;
        o.max_steps = 2000;
        auto const r = run_convergence_study(model, o);
        REQUIRE(r.levels.size() == 2);
        CHECK(r.levels[0].complete);
        CHECK_FALSE(r.levels[1].complete);
        CHECK_FALSE(r.levels[1].gap.empty());
        CHECK_FALSE(r.passed());
        CHECK(report_to_json(r)["levels"][1].contains("gap"));
    }
    SUBCASE("invalid grids")
    {
        StudyOptions o;
        o.epsilons = {0.3, 0.5};
        CHECK_THROWS_AS(run_convergence_study(model, o), InputError);
        o.epsilons = {};
        CHECK_THROWS_AS(run_convergence_study(model, o), InputError);
    }
    SUBCASE("replication seeds are distinct")
    {
        CHECK(study_seed(7, 0, 0) != study_seed(7, 0, 1));
        CHECK(study_seed(7, 0, 0) != study_seed(7, 1, 0));
        CHECK(study_seed(7, 2, 3) == study_seed(7, 2, 3));
    }
}

TEST_CASE("frozen chain targets the single atom")
{
    // Q scaled by zero: σ = m^{k0} with k0 the initial state.
    auto const model = two_state(0.0);
    auto const p = predict(model);
    REQUIRE(p.law.atoms.size() >= 1);
    CHECK(p.law.atom_mass_at(p.states[0].m) == doctest::Approx(1.0).epsilon(1e-12));
    StudyOptions o;
    o.epsilons = {0.5, 0.4};
    o.n = 200;
    o.replications = 3;
    auto const r = run_convergence_study(model, o, p);
    for (auto const& level : r.levels)
    {
        for (auto const& rep : level.replications)
        {
            for (auto const& s : rep.samples)
            {
                CHECK(s.exit_state == 0);
            }
        }
    }
}

TEST_CASE("mixing fixed staircases reproduces the full simulator")
{
    auto const model = two_state(1.0, 1.0);
    SimConfig cfg;
    cfg.epsilon = 0.35;
    cfg.seed = 101;
    auto const full = simulate_batch_full(model, cfg, 2000);
    std::vector<ChainPath> draws;
    for (std::uint64_t j = 0; j < 200; ++j)
    {
        draws.push_back(sample_chain_path(model.chain, model.horizon, 9001, j));
    }
    std::vector<ChainPath> paths;
    for (std::size_t i = 0; i < 2000; ++i)
    {
        paths.push_back(draws[i % draws.size()]);
    }
    cfg.seed = 202;
    auto const mixed = simulate_batch_fixed_z(model, paths, cfg);
    double const d = ks_two_sample(lambda_values(full), lambda_values(mixed));
    MESSAGE("two-sample KS " << d);
    CHECK(d <= 0.05);
}

TEST_CASE("plot data")
{
    ComparisonReport empty;
    CHECK(cdf_overlay_csv(empty) == "lambda,law_cdf\n");
    auto const svg = cdf_overlay_svg(empty);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") == std::string::npos);

    auto const model = shifted();
    StudyOptions o;
    o.epsilons = {0.5};
    o.n = 40;
    o.replications = 1;
    auto const r = run_convergence_study(model, o);
    auto const csv = cdf_overlay_csv(r);
    CHECK(csv.rfind("lambda,law_cdf,eps_0.5\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 202);
    auto const again = run_convergence_study(model, o);
    CHECK(cdf_overlay_svg(r) == cdf_overlay_svg(again));
    CHECK(exit_points_csv(r) == exit_points_csv(again));
    CHECK(report_to_json(r).dump() == report_to_json(again).dump());
    CHECK_THROWS_AS(emit_plot_data(r, "/proc/exitlab-no-such-dir"), IoError);
}
