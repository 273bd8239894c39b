#include "mirror/policy_dag.hpp"

#include "mirror/mirror_update.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mirror {

std::optional<int> PolicyDag::edge_between(int from, int to) const {
    if (from < 0 || from >= static_cast<int>(outgoing.size())) return std::nullopt;
    for (const int e : outgoing[static_cast<std::size_t>(from)]) {
        if (edges[static_cast<std::size_t>(e)].to == to) return e;
    }
    return std::nullopt;
}

namespace {

int grid_resolution(double grid_step) {
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw std::invalid_argument("grid_step must lie in (0, 1]");
    const double k = 1.0 / grid_step;
    const double rounded = std::round(k);
    if (std::abs(k - rounded) > 1e-9) throw std::invalid_argument("1 / grid_step must be an integer");
    return static_cast<int>(rounded);
}

/// All compositions of k into n nonnegative parts, scaled by 1/k.
std::vector<Eigen::VectorXd> simplex_grid(int n, int k) {
    std::vector<Eigen::VectorXd> out;
    std::vector<int> parts(static_cast<std::size_t>(n), 0);
    auto recurse = [&](auto&& self, int index, int remaining) -> void {
        if (index == n - 1) {
            parts[static_cast<std::size_t>(index)] = remaining;
            Eigen::VectorXd p(n);
            for (int i = 0; i < n; ++i) p(i) = static_cast<double>(parts[static_cast<std::size_t>(i)]) / k;
            out.push_back(p);
            return;
        }
        for (int c = remaining; c >= 0; --c) {
            parts[static_cast<std::size_t>(index)] = c;
            self(self, index + 1, remaining - c);
        }
    };
    recurse(recurse, 0, k);
    return out;
}

long binomial(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

long dag_vertex_count(const TabularMdp& mdp, double grid_step) {
    const int k = grid_resolution(grid_step);
    const long per_state = binomial(k + mdp.num_actions - 1, mdp.num_actions - 1);
    long total = 1;
    for (std::size_t i = 0; i < mdp.decision_states().size(); ++i) {
        total *= per_state;
        if (total > kMaxDagVertices) return total;
    }
    return total;
}

PolicyDag build_dag(const TabularMdp& mdp, double grid_step, const DriftSpec& drift, const NeighbourhoodSpec& neigh,
                    const Eigen::Ref<const Eigen::VectorXd>& beta) {
    mdp.validate();
    drift.validate();
    neigh.validate();
    check_sampling_distribution(mdp, beta);
    if (!drift.is_positive()) {
        throw std::invalid_argument(fmt::format("policy DAG needs a positive drift, got {}", to_string(drift.kind)));
    }
    if (neigh.kind == NeighbourhoodKind::param_l2_ball) {
        throw std::invalid_argument("param_l2_ball is undefined on the simplex boundary used by the policy grid");
    }
    const long count = dag_vertex_count(mdp, grid_step);
    if (count > kMaxDagVertices) {
        throw std::invalid_argument(
            fmt::format("policy grid has {} or more vertices, above the budget of {}", count, kMaxDagVertices));
    }

    PolicyDag dag;
    dag.mdp = mdp;
    dag.drift = drift;
    dag.neigh = neigh;
    dag.beta = beta;
    dag.grid_step = grid_step;
    const std::vector<int> free_states = mdp.decision_states();
    const std::vector<Eigen::VectorXd> points = simplex_grid(mdp.num_actions, grid_resolution(grid_step));

    // Odometer over the per-state grid points; terminal rows stay uniform.
    std::vector<std::size_t> digits(free_states.size(), 0);
    for (long v = 0; v < count; ++v) {
        Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(mdp.num_states, mdp.num_actions, 1.0 / mdp.num_actions);
        for (std::size_t i = 0; i < free_states.size(); ++i) {
            probs.row(free_states[i]) = points[digits[i]].transpose();
        }
        dag.vertices.emplace_back(probs);
        for (std::size_t i = free_states.size(); i-- > 0;) {
            if (++digits[i] < points.size()) break;
            digits[i] = 0;
        }
    }

    std::vector<ValueTables> values;
    values.reserve(dag.vertices.size());
    double max_adv = 0.0;
    for (const TabularPolicy& pi : dag.vertices) {
        values.push_back(evaluate_policy(mdp, pi));
        dag.eta.push_back(mdp.initial_dist.dot(values.back().v));
        for (const int s : free_states) max_adv = std::max(max_adv, values.back().adv.row(s).cwiseAbs().maxCoeff());
    }
    dag.grid_slack = grid_step * max_adv;
    dag.eta_star = value_iteration(mdp, 1e-12).eta_star;
    dag.u_beta = std::numeric_limits<double>::infinity();
    for (const int s : free_states) dag.u_beta = std::min(dag.u_beta, mdp.initial_dist(s) / beta(s));

    const int n = static_cast<int>(dag.vertices.size());
    dag.outgoing.assign(static_cast<std::size_t>(n), {});
    for (int i = 0; i < n; ++i) {
        const TabularPolicy& from = dag.vertices[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
            if (!(dag.eta[static_cast<std::size_t>(i)] < dag.eta[static_cast<std::size_t>(j)])) continue;
            const TabularPolicy& to = dag.vertices[static_cast<std::size_t>(j)];
            if (membership_margin(neigh, mdp, from, to, beta) < 0.0) continue;
            const double w = expected_drift(drift, mdp, from, values[static_cast<std::size_t>(i)], to, beta).expected;
            dag.outgoing[static_cast<std::size_t>(i)].push_back(static_cast<int>(dag.edges.size()));
            dag.edges.push_back({i, j, w});
        }
    }
    return dag;
}

std::optional<std::vector<int>> topological_order(const PolicyDag& dag) {
    const std::size_t n = dag.vertices.size();
    std::vector<int> indegree(n, 0);
    for (const DagEdge& e : dag.edges) ++indegree[static_cast<std::size_t>(e.to)];
    std::deque<int> ready;
    for (std::size_t v = 0; v < n; ++v) {
        if (indegree[v] == 0) ready.push_back(static_cast<int>(v));
    }
    std::vector<int> order;
    while (!ready.empty()) {
        const int v = ready.front();
        ready.pop_front();
        order.push_back(v);
        for (const int e : dag.outgoing[static_cast<std::size_t>(v)]) {
            const int to = dag.edges[static_cast<std::size_t>(e)].to;
            if (--indegree[static_cast<std::size_t>(to)] == 0) ready.push_back(to);
        }
    }
    if (order.size() != n) return std::nullopt;
    return order;
}

bool outgoing_exists(const PolicyDag& dag, int vertex) {
    if (vertex < 0 || vertex >= static_cast<int>(dag.vertices.size())) {
        throw std::invalid_argument("outgoing_exists: vertex out of range");
    }
    return !dag.outgoing[static_cast<std::size_t>(vertex)].empty();
}

PathWeight trace_path_weight(const PolicyDag& dag, const std::vector<int>& path) {
    if (path.empty()) throw std::invalid_argument("trace_path_weight: empty path");
    const int n = static_cast<int>(dag.vertices.size());
    for (const int v : path) {
        if (v < 0 || v >= n) throw std::invalid_argument(fmt::format("trace_path_weight: unknown vertex {}", v));
    }
    PathWeight out;
    for (std::size_t k = 1; k < path.size(); ++k) {
        if (path[k] == path[k - 1]) continue;
        const auto e = dag.edge_between(path[k - 1], path[k]);
        if (!e) {
            throw std::invalid_argument(
                fmt::format("trace_path_weight: no edge from vertex {} to vertex {}", path[k - 1], path[k]));
        }
        out.total_weight += dag.edges[static_cast<std::size_t>(*e)].weight;
    }
    const double v_max = dag.mdp.reward_bound() / (1.0 - dag.mdp.gamma);
    out.path_bound = (dag.eta_star - dag.eta[static_cast<std::size_t>(path.front())]) / dag.u_beta;
    out.uniform_bound = (dag.eta_star + v_max) / dag.u_beta;
    return out;
}

int snap_to_grid(const PolicyDag& dag, const TabularPolicy& pi) {
    if (dag.vertices.empty()) throw std::invalid_argument("snap_to_grid: empty graph");
    check_policy_shape(dag.mdp, pi);
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < dag.vertices.size(); ++v) {
        double dist = 0.0;
        for (const int s : dag.mdp.decision_states()) {
            dist = std::max(dist, (dag.vertices[v].probs().row(s) - pi.probs().row(s)).cwiseAbs().maxCoeff());
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(v);
        }
    }
    return best;
}

std::vector<int> grid_mirror_path(const PolicyDag& dag, int start, int max_steps) {
    const int n = static_cast<int>(dag.vertices.size());
    if (start < 0 || start >= n) throw std::invalid_argument("grid_mirror_path: start vertex out of range");
    std::vector<int> path{start};
    int current = start;
    for (int step = 0; step < max_steps; ++step) {
        const TabularPolicy& pi = dag.vertices[static_cast<std::size_t>(current)];
        const ValueTables old = evaluate_policy(dag.mdp, pi);
        int best = current;
        double best_value = dag.beta.dot(mirror_values(dag.mdp, pi, old, pi, dag.drift, dag.beta));
        for (int j = 0; j < n; ++j) {
            if (j == current) continue;
            const TabularPolicy& cand = dag.vertices[static_cast<std::size_t>(j)];
            if (membership_margin(dag.neigh, dag.mdp, pi, cand, dag.beta) < 0.0) continue;
            const double value = dag.beta.dot(mirror_values(dag.mdp, pi, old, cand, dag.drift, dag.beta));
            if (value > best_value) {
                best_value = value;
                best = j;
            }
        }
        if (best == current ||
            !(dag.eta[static_cast<std::size_t>(best)] > dag.eta[static_cast<std::size_t>(current)])) {
            break;
        }
        path.push_back(best);
        current = best;
    }
    return path;
}

void export_dag(const PolicyDag& dag, const std::string& prefix) {
    const std::string vertex_path = prefix + "_vertices.csv";
    const std::string edge_path = prefix + "_edges.csv";
    std::ofstream vertices(vertex_path, std::ios::binary | std::ios::trunc);
    std::ofstream edges(edge_path, std::ios::binary | std::ios::trunc);
    if (!vertices || !edges) throw std::runtime_error("cannot write DAG files with prefix '" + prefix + "'");
    vertices << "idx,eta\n";
    for (std::size_t v = 0; v < dag.eta.size(); ++v) vertices << fmt::format("{},{:.17g}\n", v, dag.eta[v]);
    edges << "from_idx,to_idx,weight\n";
    for (const DagEdge& e : dag.edges) edges << fmt::format("{},{},{:.17g}\n", e.from, e.to, e.weight);
    vertices.flush();
    edges.flush();
    if (!vertices || !edges) throw std::runtime_error("failed writing DAG files with prefix '" + prefix + "'");
}

}  // namespace mirror
