#include "doctest.h"

#include "mirror/environments.hpp"
#include "mirror/policy_dag.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace mirror;

namespace {

const DriftSpec kSqL2 = DriftSpec::make(DriftKind::sq_l2);

PolicyDag bandit_dag(const NeighbourhoodSpec& neigh) {
    const TabularMdp mdp = build_bandit();
    return build_dag(mdp, 0.25, kSqL2, neigh, Eigen::VectorXd::Ones(1));
}

int vertex_with(const PolicyDag& dag, double p0) {
    for (std::size_t v = 0; v < dag.vertices.size(); ++v) {
        if (std::abs(dag.vertices[v](0, 0) - p0) < 1e-12) return static_cast<int>(v);
    }
    return -1;
}

/// Sum of expected drifts along a path, recomputed from the drift module.
double path_drift(const PolicyDag& dag, const std::vector<int>& path) {
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const TabularPolicy& from = dag.vertices[static_cast<std::size_t>(path[i - 1])];
        const TabularPolicy& to = dag.vertices[static_cast<std::size_t>(path[i])];
        total += expected_drift(dag.drift, dag.mdp, from, to, dag.beta).expected;
    }
    return total;
}

std::size_t line_count(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

}  // namespace

TEST_CASE("bandit grid: five vertices and a single sink") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::drift_ball(kSqL2, 0.2));
    REQUIRE(dag.vertices.size() == 5);
    CHECK(dag_vertex_count(build_bandit(), 0.25) == 5);
    // eta = p(action 0) / (1 - 0.5)
    for (std::size_t v = 0; v < 5; ++v) CHECK(dag.eta[v] == doctest::Approx(2.0 * dag.vertices[v](0, 0)));
    CHECK(dag.eta_star == doctest::Approx(2.0));
    CHECK(dag.u_beta == doctest::Approx(1.0));

    int sinks = 0, sink = -1;
    for (std::size_t v = 0; v < 5; ++v) {
        if (!outgoing_exists(dag, static_cast<int>(v))) {
            ++sinks;
            sink = static_cast<int>(v);
        }
    }
    CHECK(sinks == 1);
    CHECK(sink == vertex_with(dag, 1.0));
    CHECK(topological_order(dag).has_value());
}

TEST_CASE("edges respect the definition") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::drift_ball(kSqL2, 0.2));
    for (const auto& e : dag.edges) {
        CHECK(dag.eta[static_cast<std::size_t>(e.from)] < dag.eta[static_cast<std::size_t>(e.to)]);
        CHECK(membership_margin(dag.neigh, dag.mdp, dag.vertices[static_cast<std::size_t>(e.from)],
                                dag.vertices[static_cast<std::size_t>(e.to)], dag.beta) >= 0.0);
        CHECK(e.weight >= 0.0);
        CHECK(e.weight == doctest::Approx(path_drift(dag, {e.from, e.to})).epsilon(1e-14));
    }
    // sq_l2 between neighbouring grid points is 2 * 0.25^2 = 0.125; two steps apart it is 0.5
    CHECK(dag.edge_between(vertex_with(dag, 0.0), vertex_with(dag, 0.25)).has_value());
    CHECK_FALSE(dag.edge_between(vertex_with(dag, 0.0), vertex_with(dag, 0.5)).has_value());
    CHECK_FALSE(dag.edge_between(vertex_with(dag, 0.25), vertex_with(dag, 0.0)).has_value());
}

TEST_CASE("trivial neighbourhood links every improving pair") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::trivial());
    CHECK(dag.edges.size() == 10);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            CHECK(dag.edge_between(i, j).has_value() == (dag.eta[static_cast<std::size_t>(i)] < dag.eta[static_cast<std::size_t>(j)]));
        }
    }
}

TEST_CASE("build errors") {
    const TabularMdp bandit = build_bandit();
    const Eigen::VectorXd beta = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(build_dag(bandit, 0.3, kSqL2, NeighbourhoodSpec::trivial(), beta), std::invalid_argument);
    CHECK_THROWS_AS(build_dag(bandit, 0.25, DriftSpec{}, NeighbourhoodSpec::trivial(), beta), std::invalid_argument);
    CHECK_THROWS_AS(build_dag(bandit, 0.25, DriftSpec::make(DriftKind::ppo_clip), NeighbourhoodSpec::trivial(), beta),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_dag(bandit, 0.25, kSqL2, NeighbourhoodSpec::param_l2_ball(1.0), beta),
                    std::invalid_argument);
    // 101^2 grid points on two states exceed the budget
    const TabularMdp two = build_random_mdp(2, 2, 0.5, 0);
    CHECK(dag_vertex_count(two, 0.01) == 101 * 101);
    try {
        build_dag(two, 0.01, kSqL2, NeighbourhoodSpec::trivial(), Eigen::Vector2d(0.5, 0.5));
        FAIL("expected a budget error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("10201") != std::string::npos);
    }
}

TEST_CASE("path weights") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::drift_ball(kSqL2, 0.2));
    const int a = vertex_with(dag, 0.0), b = vertex_with(dag, 0.25), c = vertex_with(dag, 0.5);
    const PathWeight single = trace_path_weight(dag, {a});
    CHECK(single.total_weight == 0.0);
    CHECK(single.path_margin() >= 0.0);

    const PathWeight w = trace_path_weight(dag, {a, b, b, c});
    CHECK(w.total_weight == doctest::Approx(0.25));
    CHECK(w.path_bound == doctest::Approx((2.0 - 0.0) / 1.0));
    // V_max = r_max / (1 - gamma) = 2
    CHECK(w.uniform_bound == doctest::Approx(4.0));

    CHECK_THROWS_AS(trace_path_weight(dag, {}), std::invalid_argument);
    CHECK_THROWS_AS(trace_path_weight(dag, {a, c}), std::invalid_argument);
    CHECK_THROWS_AS(trace_path_weight(dag, {a, 17}), std::invalid_argument);
}

TEST_CASE("bandit: every generated path of up to four steps respects the bound") {
    for (const auto& neigh : {NeighbourhoodSpec::trivial(), NeighbourhoodSpec::drift_ball(kSqL2, 0.2),
                              NeighbourhoodSpec::avg_kl_ball(0.1)}) {
        const PolicyDag dag = bandit_dag(neigh);
        for (int start = 0; start < 5; ++start) {
            const std::vector<int> path = grid_mirror_path(dag, start, 4);
            REQUIRE(path.front() == start);
            CHECK(path.size() <= 5);
            for (std::size_t i = 1; i < path.size(); ++i) {
                CHECK(dag.eta[static_cast<std::size_t>(path[i])] > dag.eta[static_cast<std::size_t>(path[i - 1])]);
            }
            const double total = path_drift(dag, path);
            const double bound = (dag.eta_star - dag.eta[static_cast<std::size_t>(start)]) / dag.u_beta;
            CHECK(total <= bound + 1e-8);
            const PathWeight w = trace_path_weight(dag, path);
            CHECK(w.total_weight == doctest::Approx(total));
            CHECK(w.path_margin() >= -1e-8);
        }
    }
}

TEST_CASE("random micro-MDPs") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularMdp mdp = build_random_mdp(2, 2, 0.5, seed);
        const Eigen::Vector2d beta(0.5, 0.5);
        const PolicyDag dag = build_dag(mdp, 0.25, kSqL2, NeighbourhoodSpec::drift_ball(kSqL2, 0.2), beta);
        CHECK(dag.vertices.size() == 25);
        const auto order = topological_order(dag);
        REQUIRE(order.has_value());
        std::vector<int> position(25);
        for (std::size_t i = 0; i < 25; ++i) position[static_cast<std::size_t>((*order)[i])] = static_cast<int>(i);
        for (const auto& e : dag.edges) CHECK(position[static_cast<std::size_t>(e.from)] < position[static_cast<std::size_t>(e.to)]);

        const double eta_star = value_iteration(mdp, 1e-12).eta_star;
        CHECK(dag.eta_star == doctest::Approx(eta_star));
        for (int v = 0; v < 25; ++v) {
            CHECK(dag.eta[static_cast<std::size_t>(v)] == doctest::Approx(expected_return(mdp, dag.vertices[static_cast<std::size_t>(v)])));
            if (dag.eta[static_cast<std::size_t>(v)] <= eta_star - dag.grid_slack) CHECK(outgoing_exists(dag, v));
            const std::vector<int> path = grid_mirror_path(dag, v, 50);
            CHECK(trace_path_weight(dag, path).path_margin() >= -1e-8);
        }
    }
}

TEST_CASE("snapping to the grid") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::trivial());
    Eigen::MatrixXd row(1, 2);
    row << 0.6, 0.4;
    CHECK(snap_to_grid(dag, TabularPolicy(row)) == vertex_with(dag, 0.5));
    row << 0.9, 0.1;
    CHECK(snap_to_grid(dag, TabularPolicy(row)) == vertex_with(dag, 1.0));
    for (int v = 0; v < 5; ++v) CHECK(snap_to_grid(dag, dag.vertices[static_cast<std::size_t>(v)]) == v);
}

TEST_CASE("csv export of the graph") {
    const PolicyDag dag = bandit_dag(NeighbourhoodSpec::trivial());
    const auto prefix = std::filesystem::temp_directory_path() / "mirror_dag_test";
    export_dag(dag, prefix.string());
    const std::filesystem::path vertices = prefix.string() + "_vertices.csv";
    const std::filesystem::path edges = prefix.string() + "_edges.csv";
    CHECK(line_count(vertices) == 6);
    CHECK(line_count(edges) == 11);
    std::ifstream in(edges);
    std::string header;
    std::getline(in, header);
    CHECK(header == "from_idx,to_idx,weight");
    std::filesystem::remove(vertices);
    std::filesystem::remove(edges);
    CHECK_THROWS_AS(export_dag(dag, "/nonexistent-dir/dag"), std::runtime_error);
}
