#pragma once

#include "mirror/drift.hpp"
#include "mirror/mirror_update.hpp"
#include "mirror/neighbourhood.hpp"
#include "mirror/policy.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

enum class TraceFormat { csv, structured };

std::string_view to_string(TraceFormat format);
std::optional<TraceFormat> parse_trace_format(std::string_view name);

inline constexpr double kDefaultDriftBallRadius = 0.05;
inline constexpr double kDefaultKlBallRadius = 0.01;

struct RunConfig {
    std::string env = "single-step";
    DriftSpec drift;
    NeighbourhoodSpec neighbourhood;
    SamplingSpec sampling;
    int iterations = 200;
    SolverConfig solver;
    std::uint64_t seed = 0;  // only the random environment draws from it
    std::string output;
    TraceFormat format = TraceFormat::csv;

    /// Config with the default radius for `neigh` (a drift_ball is measured
    /// by the run's own drift).
    static RunConfig make(std::string env, DriftSpec drift, NeighbourhoodKind neigh,
                          std::optional<double> radius = std::nullopt);

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

std::string config_to_json(const RunConfig& cfg);
/// Missing keys keep their defaults. Throws std::invalid_argument on unknown
/// vocabulary or malformed input.
RunConfig config_from_json(std::string_view text);

struct TraceRow {
    int iter = 0;
    double eta = 0.0;
    double step_drift = 0.0;       // expected drift of the step that produced this row
    double cum_drift = 0.0;
    double bound = 0.0;            // (eta* - eta_0) / U_beta
    double min_value_gain = 0.0;   // min_s V_new(s) - V_old(s)
    int solver_iters = 0;
    int safeguards = 0;
    // Not part of the CSV contract.
    double improvement_floor = 0.0;  // E_{s~d}[nu(s)/beta(s) D(s)]
    double u_beta = 0.0;
    double min_mirror_gain = 0.0;
    double margin = 0.0;             // neighbourhood membership margin of the step

    bool operator==(const TraceRow&) const = default;
};

struct LearningTrace {
    RunConfig config;
    std::vector<TraceRow> rows;
    std::optional<TabularPolicy> final_policy;
    Eigen::VectorXd final_values;
    Eigen::VectorXd oracle_values;
    double oracle_eta_star = 0.0;
    bool detailed = true;  // false when imported from CSV (reduced columns)
};

/// Thrown by run_training when a theoretical invariant fails mid-run.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterates solve_update from the uniform policy for cfg.iterations steps,
/// checking every per-step invariant as it goes.
LearningTrace run_training(const RunConfig& cfg);

struct TraceTolerances {
    double monotone = 1e-6;
    double property = 1e-8;
    double value_gain = 1e-8;
    double drift_bound = 1e-8;
    double final_eta = 1e-6;
    double final_values = 1e-6;
};

/// Final-error tolerances per environment (single-step 1e-6, chain 0.05,
/// gridworld 0.1).
TraceTolerances default_tolerances(std::string_view env);

struct VerificationFailure {
    int iter = -1;  // -1 for whole-trace checks
    std::string check;
    std::string detail;
};

struct VerificationReport {
    std::vector<VerificationFailure> failures;
    bool ok() const { return failures.empty(); }
};

VerificationReport verify_trace(const LearningTrace& trace, const TraceTolerances& tol);

/// CSV columns: iter,eta,step_drift,cum_drift,bound,min_value_gain,solver_iters,safeguards
std::string trace_to_csv(const LearningTrace& trace);
std::string trace_to_json(const LearningTrace& trace);

/// Writes the trace; throws std::runtime_error if the file cannot be written.
void export_trace(const LearningTrace& trace, const std::string& path, TraceFormat format);

/// Reads either format (detected from the content).
LearningTrace import_trace(const std::string& path);
LearningTrace parse_trace(std::string_view text);

}  // namespace mirror
