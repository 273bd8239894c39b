// Command-line front end: training runs, oracle values, trace verification
// and policy-graph export.

#include "mirror/environments.hpp"
#include "mirror/experiment.hpp"
#include "mirror/policy_dag.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace mirror;

namespace {

template <class T>
T parse_or_throw(std::optional<T> value, std::string_view what, const std::string& name) {
    if (!value) throw std::invalid_argument(fmt::format("unknown {} '{}'", what, name));
    return *value;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct RunOptions {
    std::string config_path;
    std::string env;
    std::string drift;
    double drift_coeff = 1.0;
    double clip_eps = 0.2;
    std::string neigh;
    double radius = 0.0;
    std::string sampling;
    int iters = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
};

int do_run(const RunOptions& o, const CLI::App& cmd) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : config_from_json(read_file(o.config_path));
    auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
    if (o.config_path.empty()) {
        for (const char* flag : {"--env", "--drift", "--neigh"}) {
            if (!given(flag)) throw std::invalid_argument(fmt::format("{} is required without --config", flag));
        }
    }
    if (given("--env")) cfg.env = o.env;
    if (given("--drift") || given("--drift-coeff") || given("--clip-eps")) {
        const std::string name = given("--drift") ? o.drift : std::string(to_string(cfg.drift.kind));
        cfg.drift = DriftSpec::make(parse_or_throw(parse_drift_kind(name), "drift", name),
                                    given("--drift-coeff") ? o.drift_coeff : cfg.drift.coeff);
        if (given("--clip-eps")) cfg.drift.clip_epsilon = o.clip_eps;
    }
    if (given("--neigh") || given("--radius") || given("--drift")) {
        const std::string name = given("--neigh") ? o.neigh : std::string(to_string(cfg.neighbourhood.kind));
        const NeighbourhoodKind kind = parse_or_throw(parse_neighbourhood_kind(name), "neighbourhood", name);
        std::optional<double> radius;
        if (given("--radius")) {
            radius = o.radius;
        } else if (!given("--neigh") && kind != NeighbourhoodKind::trivial) {
            radius = cfg.neighbourhood.radius;
        }
        cfg.neighbourhood = RunConfig::make(cfg.env, cfg.drift, kind, radius).neighbourhood;
    }
    if (given("--sampling")) {
        cfg.sampling.kind = parse_or_throw(parse_sampling_kind(o.sampling), "sampling", o.sampling);
    }
    if (given("--iters")) cfg.iterations = o.iters;
    if (given("--seed")) cfg.seed = o.seed;
    if (given("--out")) cfg.output = o.out;
    if (given("--format")) cfg.format = parse_or_throw(parse_trace_format(o.format), "format", o.format);

    const LearningTrace trace = run_training(cfg);
    if (!cfg.output.empty()) export_trace(trace, cfg.output, cfg.format);
    const VerificationReport report = verify_trace(trace, default_tolerances(cfg.env));
    const TraceRow& last = trace.rows.back();
    fmt::print("env={} drift={} neigh={} iters={} eta={:.12g} eta*={:.12g} cum_drift={:.6g} bound={:.6g}\n",
               cfg.env, to_string(cfg.drift.kind), to_string(cfg.neighbourhood.kind), last.iter, last.eta,
               trace.oracle_eta_star, last.cum_drift, last.bound);
    for (const auto& f : report.failures) fmt::print("FAIL [{}] iter {}: {}\n", f.check, f.iter, f.detail);
    return report.ok() ? 0 : 1;
}

int do_oracle(const std::string& env, std::uint64_t seed) {
    const TabularMdp mdp = make_env(env, seed);
    const OptimalSolution sol = value_iteration(mdp, 1e-12);
    fmt::print("eta* = {:.12g}\n", sol.eta_star);
    for (int s = 0; s < mdp.num_states; ++s) {
        fmt::print("V*[{}] = {:.12g}{}\n", s, sol.values.v(s), mdp.is_terminal(s) ? " (terminal)" : "");
    }
    if (env == "gridworld") fmt::print("{}", gridworld_map());
    return 0;
}

int do_verify(const std::string& path) {
    const LearningTrace trace = import_trace(path);
    const TraceTolerances tol = trace.detailed ? default_tolerances(trace.config.env) : TraceTolerances{};
    const VerificationReport report = verify_trace(trace, tol);
    fmt::print("{} rows, {} checks failed{}\n", trace.rows.size(), report.failures.size(),
               trace.detailed ? "" : " (CSV: per-row checks only)");
    for (const auto& f : report.failures) fmt::print("FAIL [{}] iter {}: {}\n", f.check, f.iter, f.detail);
    return report.ok() ? 0 : 1;
}

struct DagOptions {
    std::string env;
    double grid_step = 0.25;
    std::string drift;
    double drift_coeff = 1.0;
    std::string neigh;
    double radius = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int do_dag(const DagOptions& o, const CLI::App& cmd) {
    TabularMdp mdp;
    if (o.env == "bandit") {
        mdp = build_bandit();
    } else if (o.env == "random") {
        mdp = build_random_mdp(2, 2, 0.5, o.seed);
    } else {
        throw std::invalid_argument("dag supports --env bandit or random");
    }
    const DriftSpec drift = DriftSpec::make(parse_or_throw(parse_drift_kind(o.drift), "drift", o.drift), o.drift_coeff);
    const NeighbourhoodKind kind = parse_or_throw(parse_neighbourhood_kind(o.neigh), "neighbourhood", o.neigh);
    std::optional<double> radius;
    if (cmd.count("--radius") > 0) radius = o.radius;
    const NeighbourhoodSpec neigh = RunConfig::make(o.env, drift, kind, radius).neighbourhood;
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(mdp.num_states, 1.0 / mdp.num_states);

    const PolicyDag dag = build_dag(mdp, o.grid_step, drift, neigh, beta);
    export_dag(dag, o.out);
    const bool acyclic = topological_order(dag).has_value();
    int missing = 0;
    for (std::size_t v = 0; v < dag.vertices.size(); ++v) {
        if (dag.eta[v] <= dag.eta_star - dag.grid_slack && !outgoing_exists(dag, static_cast<int>(v))) ++missing;
    }
    fmt::print("vertices={} edges={} acyclic={} eta*={:.12g} slack={:.6g} stuck_vertices={}\n", dag.vertices.size(),
               dag.edges.size(), acyclic ? "yes" : "no", dag.eta_star, dag.grid_slack, missing);
    return acyclic && missing == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular mirror-learning experiments"};
    app.require_subcommand(1);

    RunOptions run;
    CLI::App* run_cmd = app.add_subcommand("run", "Train from the uniform policy and write a trace");
    run_cmd->add_option("--config", run.config_path, "JSON run configuration");
    run_cmd->add_option("--env", run.env, "single-step | chain | gridworld | bandit | random");
    run_cmd->add_option("--drift", run.drift, "trivial | kl | reverse_kl | sq_l2 | sq_tv | ppo_clip | trl_max_kl");
    run_cmd->add_option("--drift-coeff", run.drift_coeff, "drift coefficient");
    run_cmd->add_option("--clip-eps", run.clip_eps, "ppo_clip epsilon");
    run_cmd->add_option("--neigh", run.neigh, "trivial | avg_kl_ball | drift_ball | param_l2_ball");
    run_cmd->add_option("--radius", run.radius, "neighbourhood radius");
    run_cmd->add_option("--sampling", run.sampling, "uniform | rho-bar");
    run_cmd->add_option("--iters", run.iters, "number of updates");
    run_cmd->add_option("--seed", run.seed, "seed (random environment)");
    run_cmd->add_option("--out", run.out, "trace output path");
    run_cmd->add_option("--format", run.format, "csv | structured");

    std::string oracle_env;
    std::uint64_t oracle_seed = 0;
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "Print eta* and V* from value iteration");
    oracle_cmd->add_option("--env", oracle_env, "environment")->required();
    oracle_cmd->add_option("--seed", oracle_seed, "seed (random environment)");

    std::string trace_path;
    CLI::App* verify_cmd = app.add_subcommand("verify", "Re-check a saved trace");
    verify_cmd->add_option("--trace", trace_path, "trace file (CSV or structured)")->required();

    DagOptions dag;
    CLI::App* dag_cmd = app.add_subcommand("dag", "Build the policy graph over a simplex grid");
    dag_cmd->add_option("--env", dag.env, "bandit | random")->required();
    dag_cmd->add_option("--grid-step", dag.grid_step, "grid resolution (1/k)");
    dag_cmd->add_option("--drift", dag.drift, "drift kind")->required();
    dag_cmd->add_option("--drift-coeff", dag.drift_coeff, "drift coefficient");
    dag_cmd->add_option("--neigh", dag.neigh, "neighbourhood kind")->required();
    dag_cmd->add_option("--radius", dag.radius, "neighbourhood radius");
    dag_cmd->add_option("--seed", dag.seed, "seed (random environment)");
    dag_cmd->add_option("--out", dag.out, "output prefix")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return do_run(run, *run_cmd);
        if (oracle_cmd->parsed()) return do_oracle(oracle_env, oracle_seed);
        if (verify_cmd->parsed()) return do_verify(trace_path);
        if (dag_cmd->parsed()) return do_dag(dag, *dag_cmd);
    } catch (const InvariantViolation& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
