// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. States are numbered from 1, as on the command line.
// Structured results come back as plain dicts via the JSON serializers.

#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "exitlab/action.hpp"
#include "exitlab/chain.hpp"
#include "exitlab/errors.hpp"
#include "exitlab/harness.hpp"
#include "exitlab/model.hpp"
#include "exitlab/sde.hpp"
#include "exitlab/trap.hpp"

namespace py = pybind11;
using namespace exitlab;

namespace {

py::object to_python(nlohmann::json const& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

Vec to_vec(std::vector<double> const& v)
{
    if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    {
        throw InputError("point has an unsupported dimension");
    }
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out[static_cast<Eigen::Index>(i)] = v[i];
    }
    return out;
}

std::vector<double> from_vec(Vec const& v)
{
    return {v.data(), v.data() + v.size()};
}

int zero_based(ModelSpec const& model, int state)
{
    if (state < 1 || state > model.states())
    {
        throw InputError("state out of range (states are numbered from 1)");
    }
    return state - 1;
}

ChainSpec make_chain(std::vector<std::vector<double>> const& generator,
                     std::vector<double> const& initial)
{
    auto const s = static_cast<Eigen::Index>(initial.size());
    ChainSpec chain;
    chain.generator = Eigen::MatrixXd(s, s);
    chain.initial = Eigen::VectorXd(s);
    if (generator.size() != initial.size())
    {
        throw InputError("generator and initial law disagree in size");
    }
    for (Eigen::Index i = 0; i < s; ++i)
    {
        auto const& row = generator[static_cast<std::size_t>(i)];
        if (row.size() != initial.size())
        {
            throw InputError("generator must be square");
        }
        for (Eigen::Index j = 0; j < s; ++j)
        {
            chain.generator(i, j) = row[static_cast<std::size_t>(j)];
        }
        chain.initial[i] = initial[static_cast<std::size_t>(i)];
    }
    chain.validate();
    return chain;
}

py::dict law_to_dict(SigmaLaw const& law)
{
    py::list atoms;
    for (auto const& a : law.atoms)
    {
        atoms.append(py::make_tuple(a.location, a.mass));
    }
    py::dict d;
    d["atoms"] = atoms;
    d["continuous_mass"] = law.continuous_mass;
    d["total_mass"] = law.total_mass();
    d["exit_state_probs"] = law.exit_state_probs;
    d["merged_ties"] = law.merged_ties;
    return d;
}

py::dict sample_to_dict(ExitSample const& s)
{
    py::dict d;
    d["idx"] = s.idx;
    d["seed"] = s.seed;
    d["censored"] = s.censored;
    d["tau"] = s.tau;
    d["lambda_hat"] = s.lambda_hat;
    d["exit_point"] = from_vec(s.exit_point);
    d["exit_state"] = s.exit_state + 1;
    d["steps"] = s.steps;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "exit-time and exit-point computations for Markov-modulated small-noise diffusions";

    // Translators run last-registered first, so the base goes in first.
    auto const& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InputError>(m, "InputError", base);
    py::register_exception<BudgetError>(m, "BudgetError", base);

    py::class_<ModelSpec>(m, "Model")
        .def_property_readonly("dimension", [](ModelSpec const& s) { return s.dimension; })
        .def_property_readonly("n_states", &ModelSpec::states)
        .def_property_readonly("horizon", [](ModelSpec const& s) { return s.horizon; })
        .def_property_readonly("equilibrium",
                               [](ModelSpec const& s) { return from_vec(s.equilibrium); })
        .def(
            "drift",
            [](ModelSpec const& s, std::vector<double> const& x, double lambda, int state) {
                return from_vec(s.drift(to_vec(x), lambda, zero_based(s, state)));
            },
            py::arg("x"), py::arg("lambda_"), py::arg("state") = 1);

    m.def("load_model", &load_model, py::arg("path"));
    m.def(
        "model_from_json",
        [](std::string const& text) { return model_from_json(nlohmann::json::parse(text)); },
        py::arg("text"));

    m.def(
        "quasipotential",
        [](ModelSpec const& model, std::vector<double> const& x, double lambda, int state,
           int points) {
            QuasipotentialOptions o;
            o.n_points = points;
            auto const r = quasipotential(model, to_vec(x), lambda, zero_based(model, state), o);
            std::vector<std::vector<double>> path;
            for (auto const& p : r.path.points)
            {
                path.push_back(from_vec(p));
            }
            py::dict d;
            d["value"] = r.value;
            d["path"] = path;
            d["iterations"] = r.iterations;
            d["converged"] = r.converged;
            return d;
        },
        py::arg("model"), py::arg("x"), py::arg("lambda_"), py::arg("state") = 1,
        py::arg("points") = 64);

    m.def(
        "solve_m",
        [](ModelSpec const& model, int state) {
            auto const r = solve_m(model, zero_based(model, state));
            py::dict d;
            d["state"] = state;
            d["m"] = r.root;
            d["value_at_root"] = r.value_at_root;
            d["param"] = r.param;
            d["exit_point"] = from_vec(r.exit_point);
            d["ambiguous"] = r.ambiguous;
            return d;
        },
        py::arg("model"), py::arg("state") = 1);

    m.def(
        "predict", [](ModelSpec const& model) { return to_python(prediction_to_json(predict(model))); },
        py::arg("model"));

    m.def(
        "sigma_law",
        [](std::vector<std::vector<double>> const& generator, std::vector<double> const& initial,
           std::vector<double> const& m_values) {
            return law_to_dict(sigma_law(make_chain(generator, initial), m_values));
        },
        py::arg("generator"), py::arg("initial"), py::arg("m"));

    m.def(
        "sigma_cdf",
        [](std::vector<std::vector<double>> const& generator, std::vector<double> const& initial,
           std::vector<double> const& m_values, std::vector<double> const& x) {
            auto const law = sigma_law(make_chain(generator, initial), m_values);
            std::vector<double> out;
            for (double v : x)
            {
                out.push_back(law.cdf(v));
            }
            return out;
        },
        py::arg("generator"), py::arg("initial"), py::arg("m"), py::arg("x"));

    m.def(
        "sample_sigma",
        [](std::vector<std::vector<double>> const& generator, std::vector<double> const& initial,
           std::vector<double> const& m_values, std::size_t n, std::uint64_t seed) {
            std::vector<double> sigma;
            std::vector<int> states;
            for (auto const& s : sample_sigma_mc(make_chain(generator, initial), m_values, n, seed))
            {
                sigma.push_back(s.sigma);
                states.push_back(s.exit_state + 1);
            }
            return py::make_tuple(sigma, states);
        },
        py::arg("generator"), py::arg("initial"), py::arg("m"), py::arg("n"), py::arg("seed") = 1);

    m.def(
        "simulate",
        [](ModelSpec const& model, double eps, std::size_t n, std::uint64_t seed, double step,
           std::optional<double> frozen_lambda, int state) {
            SimConfig cfg;
            cfg.epsilon = eps;
            cfg.seed = seed;
            cfg.step = step;
            std::vector<ExitSample> samples;
            {
                py::gil_scoped_release release;
                samples = frozen_lambda
                              ? simulate_batch_frozen(model, *frozen_lambda,
                                                      zero_based(model, state), cfg, n)
                              : simulate_batch_full(model, cfg, n);
            }
            py::list out;
            for (auto const& s : samples)
            {
                out.append(sample_to_dict(s));
            }
            return out;
        },
        py::arg("model"), py::arg("eps"), py::arg("n") = 100, py::arg("seed") = 1,
        py::arg("step") = 0.01, py::arg("frozen_lambda") = py::none(), py::arg("state") = 1);

    m.def(
        "study",
        [](ModelSpec const& model, std::vector<double> const& eps, std::size_t n, int replications,
           std::uint64_t seed, double eta, double step) {
            StudyOptions o;
            o.epsilons = eps;
            o.n = n;
            o.replications = replications;
            o.seed = seed;
            o.eta = eta;
            o.step = step;
            nlohmann::json j;
            {
                py::gil_scoped_release release;
                j = report_to_json(run_convergence_study(model, o));
            }
            return to_python(j);
        },
        py::arg("model"), py::arg("eps"), py::arg("n") = 1000, py::arg("replications") = 5,
        py::arg("seed") = 1, py::arg("eta") = 0.2, py::arg("step") = 0.01);

    m.def(
        "solve_trap",
        [](std::string const& geometry_json, std::vector<std::pair<double, double>> const& gamma,
           std::vector<double> const& x_star, int resolution) {
            auto const cfg = nlohmann::json::parse(geometry_json);
            TrapProblem p;
            p.inner = make_domain(cfg.at("inner"));
            p.outer = make_domain(cfg.at("outer"));
            for (auto const& [a, b] : gamma)
            {
                p.gamma.push_back({a, b});
            }
            p.x_star = to_vec(x_star);
            auto const sol = solve_trap(p, resolution);
            py::dict d;
            d["c"] = sol.c;
            d["residual"] = sol.residual;
            d["normal_derivative_at_xstar"] = sol.normal_derivative_at_xstar;
            d["x0"] = sol.u.x0;
            d["y0"] = sol.u.y0;
            d["h"] = sol.u.h;
            d["n"] = sol.u.n;
            d["values"] = sol.u.values;  // row-major by y, NaN outside the annulus
            return d;
        },
        py::arg("geometry"), py::arg("gamma"), py::arg("x_star"), py::arg("resolution") = 256);

    m.def(
        "annulus_half_oracle",
        [](std::vector<double> const& x) { return annulus_half_oracle(to_vec(x)); },
        py::arg("x"));
}
