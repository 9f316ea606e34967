// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#include "exitlab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "exitlab/errors.hpp"
#include "exitlab/parallel.hpp"
#include "exitlab/rng.hpp"

namespace exitlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v)
{
    if (v.empty())
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    std::size_t const mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Fixed-precision formatting for plot coordinates.
std::string fixed(double value, int digits = 2)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << value;
    return os.str();
}

/// Empirical CDF helper over sorted samples (non-finite positives at the end).
struct Empirical
{
    std::vector<double> sorted;

    explicit Empirical(std::vector<double> samples) : sorted(std::move(samples))
    {
        std::sort(sorted.begin(), sorted.end());
    }
    double n() const { return static_cast<double>(sorted.size()); }
    double at(double x) const
    {
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x)
                                   - sorted.begin())
               / n();
    }
    double left(double x) const
    {
        return static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), x)
                                   - sorted.begin())
               / n();
    }
};

double law_cdf(SigmaLaw const& law, double x)
{
    if (!(x >= law.support_min()))
    {
        return x < law.support_min() ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    }
    return law.cdf(x);
}

double law_cdf_left(SigmaLaw const& law, double x)
{
    if (!(x > law.support_min()))
    {
        return 0.0;
    }
    return law.cdf_left(x);
}

std::string level_label(double epsilon)
{
    return "eps_" + format_double(epsilon);
}

}  // namespace

std::string format_double(double value)
{
    if (std::isnan(value))
    {
        return "nan";
    }
    if (std::isinf(value))
    {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto const res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::vector<double> Prediction::thresholds() const
{
    std::vector<double> m;
    for (auto const& s : states)
    {
        m.push_back(s.m);
    }
    return m;
}

Prediction predict(ModelSpec const& model, PredictOptions const& options)
{
    int const s = model.states();
    Prediction out;
    out.states.resize(static_cast<std::size_t>(s));
    parallel_for(static_cast<std::size_t>(s), [&](std::size_t k) {
        auto const root = solve_m(model, static_cast<int>(k), options.roots);
        auto const ep = exit_point(model, static_cast<int>(k), root, options.roots.boundary);
        auto& st = out.states[k];
        st.state = static_cast<int>(k);
        st.m = root.root;
        st.value_at_root = ep.value;
        st.param = ep.param;
        st.exit_point = ep.point;
    });
    out.law = sigma_law(model.chain, out.thresholds(), options.snapshots);
    out.exit_probs = out.law.exit_state_probs;
    return out;
}

std::vector<double> lambda_values(std::vector<ExitSample> const& samples)
{
    std::vector<double> out;
    out.reserve(samples.size());
    for (auto const& s : samples)
    {
        out.push_back(s.censored ? kInf : s.lambda_hat);
    }
    return out;
}

double ks_distance(std::vector<double> const& samples, SigmaLaw const& law)
{
    bool any_finite = false;
    for (double x : samples)
    {
        if (std::isnan(x))
        {
            throw InputError("KS distance: NaN sample");
        }
        any_finite = any_finite || x < kInf;
    }
    if (!any_finite)
    {
        throw InputError("KS distance needs at least one uncensored sample");
    }
    Empirical const emp(samples);
    double d = 0;
    auto compare = [&](double x) {
        d = std::max(d, std::abs(emp.at(x) - law_cdf(law, x)));
        d = std::max(d, std::abs(emp.left(x) - law_cdf_left(law, x)));
    };
    for (double x : emp.sorted)
    {
        if (x < kInf)
        {
            compare(x);
        }
    }
    for (auto const& atom : law.atoms)
    {
        compare(atom.location);
    }
    // Right tail: censored mass against the law's full mass.
    d = std::max(d, std::abs(emp.left(kInf) - law.total_mass()));
    return std::min(d, 1.0);
}

double ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
    {
        throw InputError("two-sample KS needs non-empty samples");
    }
    Empirical const ea(std::move(a));
    Empirical const eb(std::move(b));
    double d = 0;
    for (auto const* e : {&ea, &eb})
    {
        for (double x : e->sorted)
        {
            d = std::max(d, std::abs(ea.at(x) - eb.at(x)));
        }
    }
    return d;
}

ExitPointStats exit_point_stats(std::vector<ExitSample> const& samples,
                                Prediction const& prediction, double eta)
{
    if (!(eta > 0))
    {
        throw InputError("η must be positive");
    }
    std::size_t const s = prediction.states.size();
    ExitPointStats out;
    out.eta = eta;
    out.state_count.assign(s, 0);
    out.state_hits.assign(s, 0);
    out.confusion.assign(s, std::vector<std::size_t>(s, 0));
    std::size_t agree = 0;
    for (auto const& sample : samples)
    {
        if (sample.censored || sample.exit_point.size() == 0 || std::isnan(sample.exit_point[0]))
        {
            continue;
        }
        auto const k = static_cast<std::size_t>(sample.exit_state);
        if (k >= s)
        {
            throw InputError("exit state outside the prediction");
        }
        ++out.uncensored;
        ++out.state_count[k];
        if ((sample.exit_point - prediction.states[k].exit_point).norm() <= eta)
        {
            ++out.hits;
            ++out.state_hits[k];
        }
        std::size_t nearest = 0;
        double best = kInf;
        for (std::size_t j = 0; j < s; ++j)
        {
            double const dist = (sample.exit_point - prediction.states[j].exit_point).norm();
            if (dist < best)
            {
                best = dist;
                nearest = j;
            }
        }
        ++out.confusion[k][nearest];
        agree += nearest == k ? 1 : 0;
    }
    if (out.uncensored > 0)
    {
        double const n = static_cast<double>(out.uncensored);
        out.hit_rate = static_cast<double>(out.hits) / n;
        out.agreement = static_cast<double>(agree) / n;
    }
    return out;
}

//---------------------------------------------------------------------------//

std::uint64_t study_seed(std::uint64_t seed, std::size_t level, int replication)
{
    return derive_seed(derive_seed(seed, 0x5354554459ull, level), 0x524550ull,
                       static_cast<std::uint64_t>(replication));
}

bool ComparisonReport::passed() const
{
    for (auto const& level : levels)
    {
        if (!level.complete)
        {
            return false;
        }
    }
    for (auto const& v : verdicts)
    {
        if (v.passed.has_value() && !*v.passed)
        {
            return false;
        }
    }
    return true;
}

ComparisonReport run_convergence_study(ModelSpec const& model, StudyOptions const& options)
{
    return run_convergence_study(model, options, predict(model, options.predict));
}

ComparisonReport run_convergence_study(ModelSpec const& model, StudyOptions const& options,
                                       Prediction prediction)
{
    if (options.epsilons.empty())
    {
        throw InputError("study needs at least one ε");
    }
    if (!std::is_sorted(options.epsilons.rbegin(), options.epsilons.rend())
        || std::adjacent_find(options.epsilons.begin(), options.epsilons.end())
               != options.epsilons.end())
    {
        throw InputError("ε grid must be strictly descending");
    }
    if (options.n == 0 || options.replications < 1)
    {
        throw InputError("study needs n >= 1 and at least one replication");
    }
    ComparisonReport report;
    report.options = options;
    report.prediction = std::move(prediction);
    report.low_power = options.n == 1;
    report.trends_defined = options.epsilons.size() >= 2;

    bool stopped = false;
    for (std::size_t i = 0; i < options.epsilons.size(); ++i)
    {
        LevelResult level;
        level.epsilon = options.epsilons[i];
        if (stopped)
        {
            level.complete = false;
            level.gap = "skipped after budget exhaustion at a larger ε";
            report.levels.push_back(std::move(level));
            continue;
        }
        std::vector<double> ks;
        std::vector<double> hits;
        for (int r = 0; r < options.replications; ++r)
        {
            SimConfig cfg;
            cfg.epsilon = level.epsilon;
            cfg.step = options.step;
            cfg.eta = options.eta;
            cfg.seed = study_seed(options.seed, i, r);
            cfg.max_steps = options.max_steps;
            ReplicationResult rep;
            rep.seed = cfg.seed;
            try
            {
                rep.samples = simulate_batch_full(model, cfg, options.n);
            }
            catch (BudgetError const& e)
            {
                level.complete = false;
                level.gap = std::string("step budget exhausted: ") + e.what();
                stopped = true;
                break;
            }
            for (auto const& s : rep.samples)
            {
                rep.censored += s.censored ? 1 : 0;
            }
            level.censored += rep.censored;
            if (rep.censored == rep.samples.size())
            {
                rep.ks = 1.0;  // nothing exited: maximal disagreement
            }
            else
            {
                rep.ks = ks_distance(lambda_values(rep.samples), report.prediction.law);
            }
            rep.hit_rate = exit_point_stats(rep.samples, report.prediction, options.eta).hit_rate;
            for (auto& s : rep.samples)
            {
                s.observations.clear();
            }
            ks.push_back(rep.ks);
            hits.push_back(rep.hit_rate);
            level.replications.push_back(std::move(rep));
        }
        if (level.complete)
        {
            level.ks_median = median(ks);
            level.hit_median = median(hits);
        }
        report.levels.push_back(std::move(level));
    }

    std::vector<LevelResult const*> done;
    for (auto const& level : report.levels)
    {
        if (level.complete)
        {
            done.push_back(&level);
        }
    }
    auto trend = [&](std::string name, bool decreasing) {
        Verdict v;
        v.name = std::move(name);
        v.low_power = report.low_power;
        if (!report.trends_defined)
        {
            v.detail = "undefined for a single ε";
        }
        else if (done.size() < 2)
        {
            v.detail = "fewer than two completed levels";
        }
        else
        {
            bool ok = true;
            for (std::size_t j = 1; j < done.size(); ++j)
            {
                double const prev = decreasing ? done[j - 1]->ks_median : done[j - 1]->hit_median;
                double const cur = decreasing ? done[j]->ks_median : done[j]->hit_median;
                ok = ok && (decreasing ? cur <= prev : cur >= prev);
            }
            v.passed = ok;
            v.detail = decreasing ? "median KS nonincreasing as ε decreases"
                                  : "median hit rate nondecreasing as ε decreases";
        }
        report.verdicts.push_back(std::move(v));
    };
    trend("ks_nonincreasing", true);
    trend("hit_rate_nondecreasing", false);
    bool const last_done = !report.levels.empty() && report.levels.back().complete;
    if (options.final_ks_max)
    {
        Verdict v{"final_ks", std::nullopt, report.low_power,
                  "median KS at the smallest ε <= " + format_double(*options.final_ks_max)};
        if (last_done)
        {
            v.passed = report.levels.back().ks_median <= *options.final_ks_max;
        }
        report.verdicts.push_back(std::move(v));
    }
    if (options.final_hit_min)
    {
        Verdict v{"final_hit_rate", std::nullopt, report.low_power,
                  "median hit rate at the smallest ε >= " + format_double(*options.final_hit_min)};
        if (last_done)
        {
            v.passed = report.levels.back().hit_median >= *options.final_hit_min;
        }
        report.verdicts.push_back(std::move(v));
    }
    return report;
}

//---------------------------------------------------------------------------//

nlohmann::json prediction_to_json(Prediction const& prediction)
{
    nlohmann::json states = nlohmann::json::array();
    for (auto const& s : prediction.states)
    {
        states.push_back({{"state", s.state + 1},
                          {"m", s.m},
                          {"M_at_root", s.value_at_root},
                          {"param", s.param},
                          {"exit_point", std::vector<double>(s.exit_point.data(),
                                                             s.exit_point.data()
                                                                 + s.exit_point.size())}});
    }
    nlohmann::json atoms = nlohmann::json::array();
    for (auto const& a : prediction.law.atoms)
    {
        atoms.push_back({{"location", a.location}, {"mass", a.mass}, {"state_mass", a.state_mass}});
    }
    return {{"states", states},
            {"sigma_law",
             {{"atoms", atoms},
              {"continuous_mass", prediction.law.continuous_mass},
              {"total_mass", prediction.law.total_mass()},
              {"merged_ties", prediction.law.merged_ties}}},
            {"exit_state_probs", prediction.exit_probs}};
}

nlohmann::json report_to_json(ComparisonReport const& report)
{
    auto const& o = report.options;
    nlohmann::json options = {{"epsilons", o.epsilons},
                              {"n", o.n},
                              {"seed", o.seed},
                              {"eta", o.eta},
                              {"replications", o.replications},
                              {"step", o.step},
                              {"max_steps", o.max_steps}};
    if (o.final_ks_max)
    {
        options["final_ks_max"] = *o.final_ks_max;
    }
    if (o.final_hit_min)
    {
        options["final_hit_min"] = *o.final_hit_min;
    }
    nlohmann::json levels = nlohmann::json::array();
    for (auto const& level : report.levels)
    {
        nlohmann::json reps = nlohmann::json::array();
        for (auto const& r : level.replications)
        {
            reps.push_back({{"seed", r.seed},
                            {"ks", r.ks},
                            {"hit_rate", r.hit_rate},
                            {"censored", r.censored},
                            {"n", r.samples.size()}});
        }
        nlohmann::json entry = {{"epsilon", level.epsilon},
                                {"complete", level.complete},
                                {"replications", reps},
                                {"censored", level.censored}};
        if (level.complete)
        {
            entry["ks_median"] = level.ks_median;
            entry["hit_rate_median"] = level.hit_median;
        }
        else
        {
            entry["gap"] = level.gap;
        }
        levels.push_back(std::move(entry));
    }
    nlohmann::json verdicts = nlohmann::json::array();
    for (auto const& v : report.verdicts)
    {
        verdicts.push_back({{"name", v.name},
                            {"passed", v.passed ? nlohmann::json(*v.passed) : nlohmann::json()},
                            {"low_power", v.low_power},
                            {"detail", v.detail}});
    }
    return {{"options", options},
            {"prediction", prediction_to_json(report.prediction)},
            {"levels", levels},
            {"verdicts", verdicts},
            {"trends_defined", report.trends_defined},
            {"low_power", report.low_power},
            {"passed", report.passed()}};
}

//---------------------------------------------------------------------------//

namespace {

struct Overlay
{
    std::vector<double> grid;
    std::vector<double> law;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> curves;
};

Overlay build_overlay(ComparisonReport const& report, int grid_points)
{
    Overlay out;
    std::vector<LevelResult const*> levels;
    for (auto const& level : report.levels)
    {
        if (!level.replications.empty())
        {
            levels.push_back(&level);
        }
    }
    if (levels.empty() || report.prediction.law.atoms.empty())
    {
        return out;
    }
    double hi = report.prediction.law.support_max();
    for (auto const* level : levels)
    {
        for (auto const& s : level->replications.front().samples)
        {
            if (!s.censored && std::isfinite(s.lambda_hat))
            {
                hi = std::max(hi, s.lambda_hat);
            }
        }
    }
    hi *= 1.1;
    int const n = std::max(grid_points, 2);
    for (int i = 0; i < n; ++i)
    {
        double const x = hi * i / (n - 1);
        out.grid.push_back(x);
        out.law.push_back(law_cdf(report.prediction.law, x));
    }
    for (auto const* level : levels)
    {
        Empirical const emp(lambda_values(level->replications.front().samples));
        std::vector<double> curve;
        for (double x : out.grid)
        {
            curve.push_back(emp.at(x));
        }
        out.labels.push_back(level_label(level->epsilon));
        out.curves.push_back(std::move(curve));
    }
    return out;
}

}  // namespace

std::string cdf_overlay_csv(ComparisonReport const& report, int grid_points)
{
    Overlay const ov = build_overlay(report, grid_points);
    std::ostringstream os;
    os << "lambda,law_cdf";
    for (auto const& label : ov.labels)
    {
        os << ',' << label;
    }
    os << '\n';
    for (std::size_t i = 0; i < ov.grid.size(); ++i)
    {
        os << format_double(ov.grid[i]) << ',' << format_double(ov.law[i]);
        for (auto const& c : ov.curves)
        {
            os << ',' << format_double(c[i]);
        }
        os << '\n';
    }
    return os.str();
}

std::string cdf_overlay_svg(ComparisonReport const& report, int grid_points)
{
    Overlay const ov = build_overlay(report, grid_points);
    double const width = 640;
    double const height = 400;
    double const left = 60;
    double const right = 150;
    double const top = 20;
    double const bottom = 50;
    double const pw = width - left - right;
    double const ph = height - top - bottom;
    double const xmax = ov.grid.empty() ? 1.0 : ov.grid.back();
    auto px = [&](double x) { return left + pw * x / xmax; };
    auto py = [&](double y) { return top + ph * (1.0 - y); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0)
       << "\" height=\"" << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << ' '
       << fixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // Axes and ticks.
    os << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(py(0)) << "\" x2=\""
       << fixed(left + pw) << "\" y2=\"" << fixed(py(0)) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(py(0)) << "\" x2=\"" << fixed(left)
       << "\" y2=\"" << fixed(py(1)) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t)
    {
        double const y = 0.25 * t;
        os << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(y) + 4)
           << "\" text-anchor=\"end\">" << fixed(y, 2) << "</text>\n";
        if (!ov.grid.empty())
        {
            double const x = xmax * t / 4;
            os << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(py(0) + 16)
               << "\" text-anchor=\"middle\">" << fixed(x, 3) << "</text>\n";
        }
    }
    os << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(height - 10)
       << "\" text-anchor=\"middle\">lambda</text>\n";
    os << "<text x=\"14\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << fixed(top + ph / 2) << ")\">CDF</text>\n";

    static char const* const palette[]
        = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
    auto polyline = [&](std::vector<double> const& ys, std::string const& colour, bool dashed) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"";
        if (dashed)
        {
            os << " stroke-dasharray=\"5,3\"";
        }
        os << " points=\"";
        for (std::size_t i = 0; i < ov.grid.size(); ++i)
        {
            os << (i ? " " : "") << fixed(px(ov.grid[i])) << ',' << fixed(py(ys[i]));
        }
        os << "\"/>\n";
    };
    auto legend = [&](std::size_t row, std::string const& colour, std::string const& text) {
        double const y = top + 14 + 16 * static_cast<double>(row);
        os << "<line x1=\"" << fixed(left + pw + 10) << "\" y1=\"" << fixed(y - 4) << "\" x2=\""
           << fixed(left + pw + 30) << "\" y2=\"" << fixed(y - 4) << "\" stroke=\"" << colour
           << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fixed(left + pw + 36) << "\" y=\"" << fixed(y) << "\">" << text
           << "</text>\n";
    };
    if (!ov.grid.empty())
    {
        polyline(ov.law, "black", true);
        legend(0, "black", "law");
        for (std::size_t c = 0; c < ov.curves.size(); ++c)
        {
            std::string const colour = palette[c % std::size(palette)];
            polyline(ov.curves[c], colour, false);
            legend(c + 1, colour, ov.labels[c]);
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string exit_points_csv(ComparisonReport const& report)
{
    std::ostringstream os;
    os << "epsilon,replication,idx,censored,lambda_hat,exit_x1,exit_x2,exit_state,nearest_state,hit\n";
    auto const& states = report.prediction.states;
    for (auto const& level : report.levels)
    {
        for (std::size_t r = 0; r < level.replications.size(); ++r)
        {
            for (auto const& s : level.replications[r].samples)
            {
                os << format_double(level.epsilon) << ',' << r << ',' << s.idx << ','
                   << (s.censored ? 1 : 0) << ',' << format_double(s.lambda_hat) << ',';
                double const x1 = s.exit_point.size() > 0 ? s.exit_point[0] : std::nan("");
                double const x2 = s.exit_point.size() > 1 ? s.exit_point[1] : std::nan("");
                os << format_double(x1) << ',' << format_double(x2) << ',' << s.exit_state + 1 << ',';
                if (s.censored || std::isnan(x1) || states.empty())
                {
                    os << ",\n";
                    continue;
                }
                std::size_t nearest = 0;
                double best = kInf;
                for (std::size_t j = 0; j < states.size(); ++j)
                {
                    double const d = (s.exit_point - states[j].exit_point).norm();
                    if (d < best)
                    {
                        best = d;
                        nearest = j;
                    }
                }
                bool const hit = static_cast<std::size_t>(s.exit_state) < states.size()
                                 && (s.exit_point - states[static_cast<std::size_t>(s.exit_state)].exit_point).norm()
                                        <= report.options.eta;
                os << nearest + 1 << ',' << (hit ? 1 : 0) << '\n';
            }
        }
    }
    return os.str();
}

void write_text_file(std::string const& path, std::string const& text)
{
    std::filesystem::path const p(path);
    std::error_code ec;
    if (p.has_parent_path())
    {
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw IoError("cannot open " + path + " for writing");
    }
    out << text;
    out.close();
    if (!out)
    {
        throw IoError("failed writing " + path);
    }
}

void emit_plot_data(ComparisonReport const& report, std::string const& dir)
{
    std::filesystem::path const base(dir);
    write_text_file((base / "cdf_overlay.csv").string(), cdf_overlay_csv(report));
    write_text_file((base / "cdf_overlay.svg").string(), cdf_overlay_svg(report));
}

}  // namespace exitlab
