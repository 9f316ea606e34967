// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "exitlab/action.hpp"
#include "exitlab/errors.hpp"
#include "fixtures.hpp"

using namespace exitlab;
using exitlab::test::radial_model;

namespace {

TimedPath sample_path(std::function<Vec(double)> const& phi, double t_end, int n)
{
    TimedPath path;
    for (int i = 0; i <= n; ++i)
    {
        double const t = t_end * i / n;
        path.times.push_back(t);
        path.points.push_back(phi(t));
    }
    return path;
}

GeometricPath arc(Vec const& from, Vec const& to, double bulge, int n)
{
    GeometricPath path;
    Vec const chord = to - from;
    Vec const perp = make_vec({-chord[1], chord[0]});
    for (int i = 0; i < n; ++i)
    {
        double const s = static_cast<double>(i) / (n - 1);
        path.points.push_back(from + s * chord + bulge * std::sin(std::numbers::pi * s) * perp);
    }
    return path;
}

ModelSpec model_with_drift(nlohmann::json drift, nlohmann::json domain,
                           std::vector<double> origin = {0.0, 0.0}, double horizon = 1.0)
{
    nlohmann::json cfg = {
        {"dimension", 2}, {"drift", drift},  {"domain", domain}, {"O", origin},
        {"c", 0.1},       {"r", 0.1},        {"Lambda", horizon},
    };
    return model_from_json(cfg);
}

nlohmann::json unit_disk()
{
    return {{"kind", "ball"}, {"radius", 1.0}, {"center", {0.0, 0.0}}};
}

}  // namespace

TEST_CASE("timed action")
{
    auto model = radial_model(1.0);
    SUBCASE("constant path at the equilibrium")
    {
        auto path = sample_path([](double) { return make_vec({0.0, 0.0}); }, 1.0, 10);
        CHECK(action_of_path(model, path, 0.3, 0) == 0.0);
    }
    SUBCASE("flow line costs nothing")
    {
        auto path = sample_path(
            [](double t) { return make_vec({0.5 * std::exp(-t), 0.2 * std::exp(-t)}); }, 1.0,
            2000);
        CHECK(action_of_path(model, path, 0.0, 0) <= 1e-6);
    }
    SUBCASE("time-reversed flow line")
    {
        double const t_end = std::log(10.0);
        auto path = sample_path([](double t) { return make_vec({0.1 * std::exp(t), 0.0}); },
                                t_end, 20000);
        CHECK(action_of_path(model, path, 0.0, 0) == doctest::Approx(0.99).epsilon(1e-6));
    }
    SUBCASE("non-monotone times")
    {
        TimedPath path{{0.0, 1.0, 0.5}, {make_vec({0, 0}), make_vec({0.1, 0}), make_vec({0.2, 0})}};
        CHECK_THROWS_AS(action_of_path(model, path, 0.0, 0), InputError);
    }
    SUBCASE("singular diffusion")
    {
        auto cfg = model.source;
        cfg["sigma"] = {{"kind", "diagonal"}, {"values", {1.0, 0.0}}};
        auto degenerate = model_from_json(cfg);
        auto path = sample_path([](double t) { return make_vec({t, 0.0}); }, 0.5, 4);
        CHECK_THROWS_AS(action_of_path(degenerate, path, 0.0, 0), MatrixError);
    }
}

TEST_CASE("geometric action")
{
    auto model = radial_model(0.5);
    GeometricPath radial = arc(make_vec({0, 0}), make_vec({1, 0}), 0.0, 33);
    CHECK(geometric_action(model, radial, 0.0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    // Traversed inward along the flow it is free.
    GeometricPath inward{{radial.points.rbegin(), radial.points.rend()}};
    CHECK(geometric_action(model, inward, 0.0, 0) <= 1e-12);

    GeometricPath coincident{{make_vec({0.1, 0}), make_vec({0.1, 0}), make_vec({0.2, 0})}};
    CHECK_THROWS_AS(geometric_action(model, coincident, 0.0, 0), InputError);
    GeometricPath two{{make_vec({0.1, 0}), make_vec({0.2, 0})}};
    CHECK_THROWS_AS(geometric_action(model, two, 0.0, 0), InputError);

    SUBCASE("re-discretization invariance")
    {
        auto coarse = arc(make_vec({0, 0}), make_vec({0.6, 0.5}), 0.3, 65);
        auto fine = arc(make_vec({0, 0}), make_vec({0.6, 0.5}), 0.3, 129);
        double const a = geometric_action(model, coarse, 0.0, 0);
        double const b = geometric_action(model, fine, 0.0, 0);
        CHECK(std::abs(a - b) <= 1e-3 * b);
    }
}

TEST_CASE("reparametrization equalizes chords")
{
    GeometricPath path;
    for (int i = 0; i < 40; ++i)
    {
        double const s = std::pow(i / 39.0, 2.0);
        path.points.push_back(make_vec({std::cos(s), std::sin(s)}));
    }
    auto even = reparametrize(path, 64);
    CHECK(even.points.size() == 64);
    CHECK(chord_spread(even) <= 0.01);
    CHECK((even.points.front() - path.points.front()).norm() == 0.0);
    CHECK((even.points.back() - path.points.back()).norm() == 0.0);
}

TEST_CASE("analytic gradient matches finite differences")
{
    auto rotating = model_with_drift(
        {{"kind", "linear"}, {"beta0", 1.0}, {"matrix", {{-1.0, -2.0}, {2.0, -0.5}}}},
        unit_disk());
    auto position_dependent = model_with_drift(
        {{"kind", "anisotropic_well"}, {"beta0", 0.8}, {"alpha", {1.0, 3.0}}}, unit_disk());
    register_sigma("test_varying", [](nlohmann::json const&, int) -> SigmaFn {
        return [](Vec const& x, double) -> Mat {
            Mat s = Mat::Identity(2, 2);
            s(0, 0) = 1.0 + 0.3 * x[1] * x[1];
            s(1, 0) = 0.2 * x[0];
            return s;
        };
    });
    auto cfg = position_dependent.source;
    cfg["sigma"] = {{"kind", "test_varying"}};
    auto varying = model_from_json(cfg);

    std::mt19937_64 gen(11);
    std::normal_distribution<double> noise(0.0, 0.05);
    int checked = 0;
    for (ModelSpec const* model : {&rotating, &varying})
    {
        for (int trial = 0; trial < 10; ++trial)
        {
            auto path = arc(make_vec({0, 0}), make_vec({0.7, 0.4}), 0.2, 24);
            for (std::size_t i = 1; i + 1 < path.points.size(); ++i)
            {
                path.points[i] += make_vec({noise(gen), noise(gen)});
            }
            auto grad = geometric_action_gradient(*model, path, 0.2, 0);
            double max_err = 0;
            double scale = 0;
            for (std::size_t i = 1; i + 1 < path.points.size(); ++i)
            {
                for (int c = 0; c < 2; ++c)
                {
                    double const h = 1e-6;
                    auto plus = path;
                    auto minus = path;
                    plus.points[i][c] += h;
                    minus.points[i][c] -= h;
                    double const fd = (geometric_action(*model, plus, 0.2, 0)
                                       - geometric_action(*model, minus, 0.2, 0))
                                      / (2 * h);
                    max_err = std::max(max_err, std::abs(fd - grad[i][c]));
                    scale = std::max(scale, std::abs(fd));
                }
            }
            CHECK(max_err <= 1e-5 * scale);
            ++checked;
        }
    }
    CHECK(checked == 20);
}

TEST_CASE("quasipotential")
{
    SUBCASE("equilibrium endpoint")
    {
        auto result = quasipotential(radial_model(0.5), make_vec({0.0, 0.0}), 0.0, 0);
        CHECK(result.value == 0.0);
        CHECK(result.converged);
    }
    SUBCASE("gradient case on a test set")
    {
        auto model = radial_model(0.5);
        std::mt19937_64 gen(5);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int i = 0; i < 20; ++i)
        {
            double const r = 0.1 + 0.9 * std::sqrt(unit(gen));
            double const t = 2 * std::numbers::pi * unit(gen);
            Vec const x = make_vec({r * std::cos(t), r * std::sin(t)});
            auto result = quasipotential(model, x, 0.0, 0);
            double const exact = 0.5 * x.squaredNorm();
            CHECK(std::abs(result.value - exact) <= 0.02 * std::max(1.0, exact));
        }
    }
    SUBCASE("decaying coefficient")
    {
        auto result = quasipotential(radial_model(0.6, 1.0), make_vec({1.0, 0.0}), 0.4, 0);
        CHECK(result.value == doctest::Approx(0.6 * std::exp(-0.4)).epsilon(1e-6));
    }
    SUBCASE("anisotropic well has a curved minimizer")
    {
        auto model = model_with_drift(
            {{"kind", "anisotropic_well"}, {"beta0", 1.0}, {"alpha", {1.0, 4.0}}}, unit_disk());
        Vec const x = make_vec({0.6, 0.6});
        auto result = quasipotential(model, x, 0.0, 0);
        CHECK(result.converged);
        CHECK(result.value == doctest::Approx(0.36 + 4 * 0.36).epsilon(5e-3));
    }
    SUBCASE("rotational part orthogonal to the gradient leaves V unchanged")
    {
        auto model = model_with_drift(
            {{"kind", "linear"}, {"beta0", 1.0}, {"matrix", {{-1.0, -3.0}, {3.0, -1.0}}}},
            unit_disk());
        Vec const x = make_vec({0.8, 0.0});
        auto result = quasipotential(model, x, 0.0, 0);
        CHECK(result.value == doctest::Approx(0.64).epsilon(0.02));
        // The straight segment is far from optimal here.
        GeometricPath straight = arc(make_vec({0, 0}), x, 0.0, 64);
        CHECK(geometric_action(model, straight, 0.0, 0) > result.value * 1.5);
    }
    SUBCASE("objective history is nonincreasing")
    {
        auto model = model_with_drift(
            {{"kind", "anisotropic_well"}, {"beta0", 1.0}, {"alpha", {1.0, 4.0}}}, unit_disk());
        auto result = quasipotential(model, make_vec({-0.3, 0.7}), 0.0, 0);
        for (std::size_t i = 1; i < result.history.size(); ++i)
        {
            CHECK(result.history[i] <= result.history[i - 1] + 1e-10);
        }
    }
    SUBCASE("minimizer beats perturbed curves")
    {
        auto model = model_with_drift(
            {{"kind", "linear"}, {"beta0", 1.0}, {"matrix", {{-1.0, -1.0}, {1.0, -2.0}}}},
            unit_disk());
        Vec const x = make_vec({0.5, -0.4});
        auto result = quasipotential(model, x, 0.0, 0);
        std::mt19937_64 gen(9);
        std::normal_distribution<double> noise(0.0, 0.02);
        for (int trial = 0; trial < 100; ++trial)
        {
            auto perturbed = result.path;
            for (std::size_t i = 1; i + 1 < perturbed.points.size(); ++i)
            {
                perturbed.points[i] += make_vec({noise(gen), noise(gen)});
            }
            CHECK(result.value <= geometric_action(model, perturbed, 0.0, 0) + 1e-8);
        }
    }
    SUBCASE("too few points")
    {
        QuasipotentialOptions options;
        options.n_points = 8;
        CHECK_THROWS_AS(quasipotential(radial_model(0.5), make_vec({0.5, 0.0}), 0.0, 0, options),
                        InputError);
    }
}

TEST_CASE("boundary minimum")
{
    SUBCASE("rotational symmetry is ambiguous")
    {
        auto bm = boundary_min(radial_model(0.5), 0.0, 0);
        CHECK(bm.value == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(bm.ambiguous);
    }
    SUBCASE("shifted equilibrium")
    {
        auto bm = boundary_min(radial_model(0.5, 0.0, 0.2, 0.0), 0.0, 0);
        CHECK(bm.value == doctest::Approx(0.32).epsilon(1e-4));
        CHECK((bm.point - make_vec({1.0, 0.0})).norm() <= 1e-3);
        CHECK_FALSE(bm.ambiguous);
    }
    SUBCASE("larger ball")
    {
        auto model = model_with_drift({{"kind", "radial_decay"}, {"beta0", 1.0}},
                                      {{"kind", "ball"}, {"radius", 1.5}, {"center", {0, 0}}});
        CHECK(boundary_min(model, 0.7, 0).value == doctest::Approx(2.25).epsilon(1e-6));
    }
}

TEST_CASE("root of M = λ")
{
    SUBCASE("decaying coefficient")
    {
        auto entry = solve_m(radial_model(0.6, 1.0), 0);
        CHECK(std::abs(entry.root - 0.40156363678707263) <= 1e-3);
        CHECK(std::abs(entry.value_at_root - entry.root) <= 1e-3);
        CHECK(entry.profile.size() == 32);
        for (auto const& p : entry.profile)
        {
            CHECK(p.value > 0);
        }
    }
    SUBCASE("constant M")
    {
        auto entry = solve_m(radial_model(0.5, 0.0, 0.0, 0.0, 0.2, 0.1, 1.0), 0);
        CHECK(entry.root == doctest::Approx(0.5).epsilon(1e-3));
    }
    SUBCASE("no sign change")
    {
        CHECK_THROWS_AS(solve_m(radial_model(5.0), 0), NoRootError);
    }
    SUBCASE("two sign changes")
    {
        register_drift("test_bowl", [](nlohmann::json const&, Vec const& origin) {
            StateCoefficients coeff;
            coeff.drift = [origin](Vec const& x, double lambda) -> Vec {
                double const beta = 0.45 + 2.0 * (lambda - 0.5) * (lambda - 0.5);
                return -beta * (x - origin);
            };
            return coeff;
        });
        auto model = model_with_drift({{"kind", "test_bowl"}}, unit_disk(), {0.0, 0.0}, 1.5);
        CHECK_THROWS_AS(solve_m(model, 0), MultipleRootError);
    }
}

TEST_CASE("exit point")
{
    SUBCASE("nearest boundary point")
    {
        auto result = exit_point(radial_model(0.5, 0.0, 0.2, 0.0), 0);
        CHECK((result.point - make_vec({1.0, 0.0})).norm() <= 1e-3);
        CHECK(result.window.size() == 5);
        for (auto const& w : result.window)
        {
            CHECK((w.point - result.point).norm() <= 1e-2);
        }
    }
    SUBCASE("symmetric model")
    {
        CHECK_THROWS_AS(exit_point(radial_model(0.5), 0), AmbiguousMinimizerError);
    }
    SUBCASE("two short-axis minimizers")
    {
        auto model = model_with_drift({{"kind", "radial_decay"}, {"beta0", 0.5}},
                                      {{"kind", "ellipse"}, {"semi_axes", {2.0, 1.0}}});
        CHECK_THROWS_AS(exit_point(model, 0), AmbiguousMinimizerError);
    }
}
