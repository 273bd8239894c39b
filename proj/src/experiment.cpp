#include "mirror/experiment.hpp"

#include "mirror/environments.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mirror {

using json = nlohmann::json;

std::string_view to_string(TraceFormat format) {
    return format == TraceFormat::csv ? "csv" : "structured";
}

std::optional<TraceFormat> parse_trace_format(std::string_view name) {
    if (name == "csv") return TraceFormat::csv;
    if (name == "structured" || name == "json") return TraceFormat::structured;
    return std::nullopt;
}

RunConfig RunConfig::make(std::string env, DriftSpec drift, NeighbourhoodKind neigh, std::optional<double> radius) {
    RunConfig cfg;
    cfg.env = std::move(env);
    cfg.drift = drift;
    switch (neigh) {
        case NeighbourhoodKind::trivial: cfg.neighbourhood = NeighbourhoodSpec::trivial(); break;
        case NeighbourhoodKind::avg_kl_ball:
            cfg.neighbourhood = NeighbourhoodSpec::avg_kl_ball(radius.value_or(kDefaultKlBallRadius));
            break;
        case NeighbourhoodKind::drift_ball:
            cfg.neighbourhood = NeighbourhoodSpec::drift_ball(drift, radius.value_or(kDefaultDriftBallRadius));
            break;
        case NeighbourhoodKind::param_l2_ball:
            cfg.neighbourhood = NeighbourhoodSpec::param_l2_ball(radius.value_or(1.0));
            break;
    }
    return cfg;
}

void RunConfig::validate() const {
    const auto& names = environment_names();
    if (std::find(names.begin(), names.end(), env) == names.end()) {
        throw std::invalid_argument("unknown environment '" + env + "'");
    }
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    drift.validate();
    neighbourhood.validate();
    solver.validate();
}

// ---------------------------------------------------------------------------
// Config serialisation

namespace {

json drift_to_json(const DriftSpec& d) {
    return {{"kind", std::string(to_string(d.kind))},
            {"coeff", d.coeff},
            {"clip_epsilon", d.clip_epsilon},
            {"nu", std::string(to_string(d.nu))}};
}

template <class T>
T parse_or_throw(std::optional<T> value, std::string_view what, const std::string& name) {
    if (!value) throw std::invalid_argument(fmt::format("unknown {} '{}'", what, name));
    return *value;
}

DriftSpec drift_from_json(const json& j) {
    const std::string kind = j.value("kind", std::string("trivial"));
    DriftSpec d = DriftSpec::make(parse_or_throw(parse_drift_kind(kind), "drift", kind), j.value("coeff", 1.0));
    d.clip_epsilon = j.value("clip_epsilon", d.clip_epsilon);
    if (j.contains("nu")) {
        const std::string nu = j.at("nu").get<std::string>();
        d.nu = parse_or_throw(parse_nu_kind(nu), "nu weighting", nu);
    }
    return d;
}

json solver_to_json(const SolverConfig& s) {
    return {{"max_outer_iters", s.max_outer_iters}, {"grad_tol", s.grad_tol},
            {"step_init", s.step_init},             {"backtrack_factor", s.backtrack_factor},
            {"finite_diff_h", s.finite_diff_h},     {"max_logit", s.max_logit},
            {"multiplier_iters", s.multiplier_iters}};
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig s;
    s.max_outer_iters = j.value("max_outer_iters", s.max_outer_iters);
    s.grad_tol = j.value("grad_tol", s.grad_tol);
    s.step_init = j.value("step_init", s.step_init);
    s.backtrack_factor = j.value("backtrack_factor", s.backtrack_factor);
    s.finite_diff_h = j.value("finite_diff_h", s.finite_diff_h);
    s.max_logit = j.value("max_logit", s.max_logit);
    s.multiplier_iters = j.value("multiplier_iters", s.multiplier_iters);
    return s;
}

json config_json(const RunConfig& cfg) {
    return {{"env", cfg.env},
            {"seed", cfg.seed},
            {"iterations", cfg.iterations},
            {"output", cfg.output},
            {"format", std::string(to_string(cfg.format))},
            {"sampling", std::string(to_string(cfg.sampling.kind))},
            {"drift", drift_to_json(cfg.drift)},
            {"neighbourhood",
             {{"kind", std::string(to_string(cfg.neighbourhood.kind))},
              {"radius", cfg.neighbourhood.radius},
              {"drift_ref", drift_to_json(cfg.neighbourhood.drift_ref)}}},
            {"solver", solver_to_json(cfg.solver)}};
}

RunConfig config_of(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    RunConfig cfg;
    cfg.env = j.value("env", cfg.env);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.output = j.value("output", cfg.output);
    if (j.contains("format")) {
        const std::string f = j.at("format").get<std::string>();
        cfg.format = parse_or_throw(parse_trace_format(f), "format", f);
    }
    if (j.contains("sampling")) {
        const std::string s = j.at("sampling").get<std::string>();
        cfg.sampling.kind = parse_or_throw(parse_sampling_kind(s), "sampling", s);
    }
    if (j.contains("drift")) cfg.drift = drift_from_json(j.at("drift"));
    if (j.contains("neighbourhood")) {
        const json& n = j.at("neighbourhood");
        const std::string kind = n.value("kind", std::string("trivial"));
        const NeighbourhoodKind nk = parse_or_throw(parse_neighbourhood_kind(kind), "neighbourhood", kind);
        std::optional<double> radius;
        if (n.contains("radius")) radius = n.at("radius").get<double>();
        cfg.neighbourhood = RunConfig::make(cfg.env, cfg.drift, nk, radius).neighbourhood;
        if (nk == NeighbourhoodKind::drift_ball && n.contains("drift_ref")) {
            cfg.neighbourhood.drift_ref = drift_from_json(n.at("drift_ref"));
        }
    }
    if (j.contains("solver")) cfg.solver = solver_from_json(j.at("solver"));
    return cfg;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return config_json(cfg).dump(2); }

RunConfig config_from_json(std::string_view text) {
    try {
        return config_of(json::parse(text));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training

namespace {

double min_ratio(const TabularMdp& mdp, const Eigen::VectorXd& beta) {
    double u = std::numeric_limits<double>::infinity();
    for (const int s : mdp.decision_states()) u = std::min(u, mdp.initial_dist(s) / beta(s));
    return u;
}

std::string describe(const TraceRow& r) {
    return fmt::format(
        "iter={} eta={:.17g} step_drift={:.17g} cum_drift={:.17g} bound={:.17g} min_value_gain={:.17g} "
        "solver_iters={} safeguards={} improvement_floor={:.17g} u_beta={:.17g} min_mirror_gain={:.17g} "
        "margin={:.17g}",
        r.iter, r.eta, r.step_drift, r.cum_drift, r.bound, r.min_value_gain, r.solver_iters, r.safeguards,
        r.improvement_floor, r.u_beta, r.min_mirror_gain, r.margin);
}

}  // namespace

LearningTrace run_training(const RunConfig& cfg) {
    cfg.validate();
    const TabularMdp mdp = make_env(cfg.env, cfg.seed);
    const OptimalSolution oracle = value_iteration(mdp, 1e-12);

    LearningTrace trace;
    trace.config = cfg;
    trace.oracle_eta_star = oracle.eta_star;
    trace.oracle_values = oracle.values.v;

    SoftmaxPolicy logits = SoftmaxPolicy::uniform(mdp.num_states, mdp.num_actions);
    TabularPolicy pi = logits.to_simplex();
    ValueTables values = evaluate_policy(mdp, pi);
    double eta = mdp.initial_dist.dot(values.v);
    const double eta0 = eta;
    double u_beta = min_ratio(mdp, cfg.sampling.resolve(mdp, pi));

    TraceRow first;
    first.eta = eta;
    first.bound = (oracle.eta_star - eta0) / u_beta;
    first.u_beta = u_beta;
    trace.rows.push_back(first);

    double cum = 0.0;
    for (int n = 1; n <= cfg.iterations; ++n) {
        const Eigen::VectorXd beta = cfg.sampling.resolve(mdp, pi);
        u_beta = std::min(u_beta, min_ratio(mdp, beta));
        const UpdateResult step = solve_update(mdp, logits, cfg.drift, cfg.neighbourhood, beta, cfg.solver);
        const ValueTables next = evaluate_policy(mdp, step.new_policy);
        const double next_eta = mdp.initial_dist.dot(next.v);

        const DriftReport& dr = step.drift_report;
        TraceRow row;
        row.iter = n;
        row.eta = next_eta;
        row.step_drift = dr.expected;
        cum += dr.expected;
        row.cum_drift = cum;
        row.bound = (oracle.eta_star - eta0) / u_beta;
        row.min_value_gain = (next.v - values.v).minCoeff();
        row.solver_iters = step.solver_iters;
        row.safeguards = static_cast<int>(step.safeguarded_states.size());
        for (int s = 0; s < mdp.num_states; ++s) {
            if (dr.per_state(s) != 0.0) {
                row.improvement_floor += mdp.initial_dist(s) * dr.nu_weights(s) / beta(s) * dr.per_state(s);
            }
        }
        row.u_beta = u_beta;
        row.min_mirror_gain = step.per_state_mirror_gain.minCoeff();
        row.margin = membership_margin(cfg.neighbourhood, mdp, logits, step.new_logits, beta);

        std::vector<std::string> problems;
        const double gap = next_eta - eta;
        if (gap < -1e-6) problems.push_back(fmt::format("eta decreased by {:.3g}", -gap));
        if (gap < row.improvement_floor - 1e-8) {
            problems.push_back(fmt::format("eta gap {:.17g} below drift floor {:.17g}", gap, row.improvement_floor));
        }
        if (row.min_value_gain < -1e-8) {
            problems.push_back(fmt::format("a state value fell by {:.3g}", -row.min_value_gain));
        }
        if (row.step_drift < -1e-12) problems.push_back("negative step drift");
        if (row.cum_drift > row.bound + 1e-8) problems.push_back("cumulative drift exceeds the bound");
        if (row.min_mirror_gain < -1e-10) problems.push_back("negative per-state mirror gain after the safeguard");
        if (row.margin < -1e-10) problems.push_back("update left the neighbourhood");
        if (step.stalled && step.stationary) {
            double residual = 0.0;
            for (const int s : mdp.decision_states()) residual = std::max(residual, values.adv.row(s).maxCoeff());
            if (residual > 1e-6) {
                problems.push_back(fmt::format("stationary stall with Bellman residual {:.3g}", residual));
            }
        }
        if (!problems.empty()) {
            std::string message = fmt::format("invariant violated in {} at iteration {}:", cfg.env, n);
            for (const auto& p : problems) message += "\n  " + p;
            message += "\n  previous: " + describe(trace.rows.back());
            message += "\n  current:  " + describe(row);
            throw InvariantViolation(message);
        }

        trace.rows.push_back(row);
        logits = step.new_logits;
        pi = step.new_policy;
        values = next;
        eta = next_eta;
    }
    trace.final_policy = pi;
    trace.final_values = values.v;
    return trace;
}

// ---------------------------------------------------------------------------
// Verification

TraceTolerances default_tolerances(std::string_view env) {
    TraceTolerances tol;
    if (env == "chain") {
        tol.final_eta = tol.final_values = 0.05;
    } else if (env == "gridworld") {
        tol.final_eta = tol.final_values = 0.1;
    } else if (env != "single-step") {
        tol.final_eta = tol.final_values = 1e-3;
    }
    return tol;
}

VerificationReport verify_trace(const LearningTrace& trace, const TraceTolerances& tol) {
    VerificationReport report;
    auto fail = [&](int iter, std::string check, std::string detail) {
        report.failures.push_back({iter, std::move(check), std::move(detail)});
    };
    const auto& rows = trace.rows;
    if (rows.empty()) {
        fail(-1, "nonempty", "trace has no rows");
        return report;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const TraceRow& r = rows[i];
        if (r.step_drift < -1e-12) fail(r.iter, "drift_nonnegative", fmt::format("step drift {:.3g}", r.step_drift));
        if (r.cum_drift > r.bound + tol.drift_bound) {
            fail(r.iter, "drift_sum_bound", fmt::format("cum_drift {:.17g} > bound {:.17g}", r.cum_drift, r.bound));
        }
        if (r.min_value_gain < -tol.value_gain) {
            fail(r.iter, "value_improvement", fmt::format("min value gain {:.3g}", r.min_value_gain));
        }
        if (i == 0) continue;
        const double gap = r.eta - rows[i - 1].eta;
        if (gap < -tol.monotone) fail(r.iter, "monotone", fmt::format("eta fell by {:.3g}", -gap));
        if (!trace.detailed) continue;
        if (gap < r.improvement_floor - tol.property) {
            fail(r.iter, "improvement_floor",
                 fmt::format("eta gap {:.17g} < drift floor {:.17g}", gap, r.improvement_floor));
        }
        if (gap < r.u_beta * r.step_drift - tol.property) {
            fail(r.iter, "edge_weight_bound",
                 fmt::format("eta gap {:.17g} < U_beta * drift {:.17g}", gap, r.u_beta * r.step_drift));
        }
        if (r.min_mirror_gain < -1e-10) {
            fail(r.iter, "mirror_gain", fmt::format("min mirror gain {:.3g}", r.min_mirror_gain));
        }
        if (r.margin < -1e-10) fail(r.iter, "membership", fmt::format("margin {:.3g}", r.margin));
    }
    if (trace.detailed) {
        const double err = std::abs(rows.back().eta - trace.oracle_eta_star);
        if (err > tol.final_eta) {
            fail(rows.back().iter, "final_eta",
                 fmt::format("|eta - eta*| = {:.3g} > {:.3g}", err, tol.final_eta));
        }
        if (trace.final_values.size() == trace.oracle_values.size() && trace.final_values.size() > 0) {
            const double verr = (trace.final_values - trace.oracle_values).cwiseAbs().maxCoeff();
            if (verr > tol.final_values) {
                fail(rows.back().iter, "final_values",
                     fmt::format("|V - V*|_inf = {:.3g} > {:.3g}", verr, tol.final_values));
            }
        } else {
            fail(-1, "final_values", "final or oracle values missing");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Export / import

namespace {

constexpr std::string_view kCsvHeader = "iter,eta,step_drift,cum_drift,bound,min_value_gain,solver_iters,safeguards";

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double number_or_inf(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json vector_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_of(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

double parse_double(std::string_view field, int line) {
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        // from_chars has no spelling for infinities written by other tools
        if (field == "inf") return std::numeric_limits<double>::infinity();
        if (field == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::invalid_argument(fmt::format("trace line {}: bad number '{}'", line, field));
    }
    return value;
}

int parse_int(std::string_view field, int line) {
    int value = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw std::invalid_argument(fmt::format("trace line {}: bad integer '{}'", line, field));
    }
    return value;
}

LearningTrace parse_csv(std::string_view text) {
    LearningTrace trace;
    trace.detailed = false;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (number == 1) {
            if (line != kCsvHeader) throw std::invalid_argument("trace CSV has an unexpected header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 8) throw std::invalid_argument(fmt::format("trace line {}: expected 8 fields", number));
        TraceRow r;
        r.iter = parse_int(fields[0], number);
        r.eta = parse_double(fields[1], number);
        r.step_drift = parse_double(fields[2], number);
        r.cum_drift = parse_double(fields[3], number);
        r.bound = parse_double(fields[4], number);
        r.min_value_gain = parse_double(fields[5], number);
        r.solver_iters = parse_int(fields[6], number);
        r.safeguards = parse_int(fields[7], number);
        trace.rows.push_back(r);
    }
    if (number == 0) throw std::invalid_argument("empty trace");
    return trace;
}

LearningTrace parse_structured(std::string_view text) {
    try {
        const json j = json::parse(text);
        LearningTrace trace;
        trace.config = config_of(j.at("config"));
        trace.oracle_eta_star = j.at("oracle_eta_star").get<double>();
        trace.oracle_values = vector_of(j.at("oracle_values"));
        trace.final_values = vector_of(j.at("final_values"));
        const json& policy = j.at("final_policy");
        if (!policy.empty()) {
            Eigen::MatrixXd probs(static_cast<Eigen::Index>(policy.size()),
                                  static_cast<Eigen::Index>(policy[0].size()));
            for (std::size_t s = 0; s < policy.size(); ++s) {
                for (std::size_t a = 0; a < policy[s].size(); ++a) {
                    probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = policy[s][a].get<double>();
                }
            }
            trace.final_policy = TabularPolicy(probs);
        }
        for (const json& r : j.at("rows")) {
            TraceRow row;
            row.iter = r.at("iter").get<int>();
            row.eta = r.at("eta").get<double>();
            row.step_drift = r.at("step_drift").get<double>();
            row.cum_drift = r.at("cum_drift").get<double>();
            row.bound = r.at("bound").get<double>();
            row.min_value_gain = r.at("min_value_gain").get<double>();
            row.solver_iters = r.at("solver_iters").get<int>();
            row.safeguards = r.at("safeguards").get<int>();
            row.improvement_floor = r.at("improvement_floor").get<double>();
            row.u_beta = r.at("u_beta").get<double>();
            row.min_mirror_gain = r.at("min_mirror_gain").get<double>();
            row.margin = number_or_inf(r.at("margin"));
            trace.rows.push_back(row);
        }
        return trace;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed structured trace: ") + e.what());
    }
}

}  // namespace

std::string trace_to_csv(const LearningTrace& trace) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const TraceRow& r : trace.rows) {
        out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.iter, r.eta, r.step_drift,
                           r.cum_drift, r.bound, r.min_value_gain, r.solver_iters, r.safeguards);
    }
    return out;
}

std::string trace_to_json(const LearningTrace& trace) {
    json rows = json::array();
    for (const TraceRow& r : trace.rows) {
        rows.push_back({{"iter", r.iter},
                        {"eta", r.eta},
                        {"step_drift", r.step_drift},
                        {"cum_drift", r.cum_drift},
                        {"bound", r.bound},
                        {"min_value_gain", r.min_value_gain},
                        {"solver_iters", r.solver_iters},
                        {"safeguards", r.safeguards},
                        {"improvement_floor", r.improvement_floor},
                        {"u_beta", r.u_beta},
                        {"min_mirror_gain", r.min_mirror_gain},
                        {"margin", finite_or_null(r.margin)}});
    }
    json policy = json::array();
    if (trace.final_policy) {
        for (int s = 0; s < trace.final_policy->num_states(); ++s) {
            policy.push_back(vector_json(trace.final_policy->row(s)));
        }
    }
    const json j = {{"config", config_json(trace.config)},
                    {"oracle_eta_star", trace.oracle_eta_star},
                    {"oracle_values", vector_json(trace.oracle_values)},
                    {"final_values", vector_json(trace.final_values)},
                    {"final_policy", policy},
                    {"rows", rows}};
    return j.dump(1) + "\n";
}

void export_trace(const LearningTrace& trace, const std::string& path, TraceFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << (format == TraceFormat::csv ? trace_to_csv(trace) : trace_to_json(trace));
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

LearningTrace parse_trace(std::string_view text) {
    const auto start = text.find_first_not_of(" \t\r\n");
    if (start != std::string_view::npos && text[start] == '{') return parse_structured(text);
    return parse_csv(text);
}

LearningTrace import_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_trace(buffer.str());
}

}  // namespace mirror
