// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "exitlab/action.hpp"
#include "exitlab/chain.hpp"
#include "exitlab/sde.hpp"

namespace exitlab {

struct StatePrediction
{
    int state = 0;
    double m = 0;
    double value_at_root = 0;
    double param = 0;
    Vec exit_point;
};

struct Prediction
{
    std::vector<StatePrediction> states;
    SigmaLaw law;
    /// P(ξ_σ = k): the predicted weight of x^k in the exit-point law.
    std::vector<double> exit_probs;

    std::vector<double> thresholds() const;
};

struct PredictOptions
{
    RootOptions roots;
    int snapshots = 256;
};

/// m^k and x^k for every state, then the law of (σ, ξ_σ).
Prediction predict(ModelSpec const& model, PredictOptions const& options = {});

/*!
 * sup_x |F_n(x) - F(x)| with F_n the empirical CDF. Non-finite positive
 * samples (censored runs) count in n but never in F_n. Both one-sided limits
 * are compared at every sample point and every atom of the law.
 */
double ks_distance(std::vector<double> const& samples, SigmaLaw const& law);

/// Two-sample KS distance between empirical CDFs (censored = +inf).
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// λ̂ values with censored runs mapped to +inf.
std::vector<double> lambda_values(std::vector<ExitSample> const& samples);

struct ExitPointStats
{
    double eta = 0;
    std::size_t uncensored = 0;
    std::size_t hits = 0;
    double hit_rate = 0;  //!< exits within η of x^{exit state}; 0 when nothing exited
    std::vector<std::size_t> state_count;
    std::vector<std::size_t> state_hits;
    /// confusion[recorded exit state][nearest predicted x^k]
    std::vector<std::vector<std::size_t>> confusion;
    double agreement = 0;  //!< recorded state equals nearest-x^k state
};

ExitPointStats exit_point_stats(std::vector<ExitSample> const& samples,
                                Prediction const& prediction, double eta);

struct StudyOptions
{
    std::vector<double> epsilons;  //!< sorted descending
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    double eta = 0.2;
    int replications = 5;
    double step = 0.01;
    std::uint64_t max_steps = 1000000000ull;
    std::optional<double> final_ks_max;   //!< extra verdict at the smallest ε
    std::optional<double> final_hit_min;  //!< extra verdict at the smallest ε
    PredictOptions predict;
};

struct ReplicationResult
{
    std::uint64_t seed = 0;
    std::size_t censored = 0;
    double ks = 0;
    double hit_rate = 0;
    std::vector<ExitSample> samples;
};

struct LevelResult
{
    double epsilon = 0;
    bool complete = true;
    std::string gap;  //!< reason when the level could not be finished
    std::vector<ReplicationResult> replications;
    double ks_median = 0;
    double hit_median = 0;
    std::size_t censored = 0;
};

struct Verdict
{
    std::string name;
    std::optional<bool> passed;  //!< empty: undefined (e.g. one ε only)
    bool low_power = false;
    std::string detail;
};

struct ComparisonReport
{
    StudyOptions options;
    Prediction prediction;
    std::vector<LevelResult> levels;
    std::vector<Verdict> verdicts;
    bool low_power = false;
    bool trends_defined = false;

    /// All defined verdicts passed and no level has a gap.
    bool passed() const;
};

/*!
 * For each ε, `replications` independent batches of n full simulations; KS
 * to the predicted law and hit rates per batch, medians across batches.
 * Budget exhaustion stops the sweep and leaves an explicit gap.
 */
ComparisonReport run_convergence_study(ModelSpec const& model, StudyOptions const& options);

/// Same as above with a precomputed prediction.
ComparisonReport run_convergence_study(ModelSpec const& model, StudyOptions const& options,
                                       Prediction prediction);

/// Seed of replication r at grid level i.
std::uint64_t study_seed(std::uint64_t seed, std::size_t level, int replication);

/// Serialized forms number states from 1, like the command line.
nlohmann::json prediction_to_json(Prediction const& prediction);
nlohmann::json report_to_json(ComparisonReport const& report);

/// CDF overlay table: λ, law CDF, one empirical column per ε (first replication).
std::string cdf_overlay_csv(ComparisonReport const& report, int grid_points = 201);
std::string cdf_overlay_svg(ComparisonReport const& report, int grid_points = 201);
std::string exit_points_csv(ComparisonReport const& report);

/// Writes cdf_overlay.csv and cdf_overlay.svg into dir; IoError on failure.
void emit_plot_data(ComparisonReport const& report, std::string const& dir);

/// Writes text to path, creating parent directories; throws IoError.
void write_text_file(std::string const& path, std::string const& text);

/// Shortest round-trip decimal for a double ("nan", "inf", "-inf" otherwise).
std::string format_double(double value);

}  // namespace exitlab
