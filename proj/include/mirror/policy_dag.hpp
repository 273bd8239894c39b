#pragma once

#include "mirror/drift.hpp"
#include "mirror/mdp.hpp"
#include "mirror/neighbourhood.hpp"
#include "mirror/policy.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace mirror {

inline constexpr long kMaxDagVertices = 10000;

struct DagEdge {
    int from = 0;
    int to = 0;
    double weight = 0.0;  // expected drift of `to` relative to `from`
};

/**
 * Policy graph over a product grid of per-state simplex points. An edge
 * from pi1 to pi2 exists when eta(pi1) < eta(pi2) and pi2 lies in the
 * neighbourhood of pi1.
 */
struct PolicyDag {
    TabularMdp mdp;
    DriftSpec drift;
    NeighbourhoodSpec neigh;
    Eigen::VectorXd beta;
    double grid_step = 0.0;
    std::vector<TabularPolicy> vertices;
    std::vector<double> eta;
    std::vector<DagEdge> edges;
    std::vector<std::vector<int>> outgoing;  // edge indices by source vertex
    double eta_star = 0.0;
    double u_beta = 0.0;        // min over decision states of d(s) / beta(s)
    double grid_slack = 0.0;    // grid_step * largest |advantage| over all vertices

    /// Index into `edges`, if the edge exists.
    std::optional<int> edge_between(int from, int to) const;
};

/// Number of points of the action simplex at resolution `grid_step`, raised
/// to the number of decision states. Throws std::invalid_argument unless
/// 1 / grid_step is an integer.
long dag_vertex_count(const TabularMdp& mdp, double grid_step);

/// Throws std::invalid_argument when the vertex count exceeds
/// kMaxDagVertices, when the drift is not positive, or for param_l2_ball
/// (grid vertices lie on the simplex boundary).
PolicyDag build_dag(const TabularMdp& mdp, double grid_step, const DriftSpec& drift, const NeighbourhoodSpec& neigh,
                    const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Kahn's algorithm; nullopt if the graph has a cycle.
std::optional<std::vector<int>> topological_order(const PolicyDag& dag);

bool outgoing_exists(const PolicyDag& dag, int vertex);

struct PathWeight {
    double total_weight = 0.0;
    double path_bound = 0.0;      // (eta* - eta(first vertex)) / U_beta
    double uniform_bound = 0.0;   // (eta* + V_max) / U_beta
    double path_margin() const { return path_bound - total_weight; }
    double uniform_margin() const { return uniform_bound - total_weight; }
};

/// Sums edge weights along `path`; consecutive equal vertices contribute
/// nothing. Throws std::invalid_argument for an empty path, an unknown
/// vertex or a consecutive pair without an edge.
PathWeight trace_path_weight(const PolicyDag& dag, const std::vector<int>& path);

/// Nearest vertex in the sup norm; ties go to the lowest index.
int snap_to_grid(const PolicyDag& dag, const TabularPolicy& pi);

/**
 * Mirror learning restricted to the grid: from `start`, repeatedly move to
 * the vertex of the neighbourhood that maximises the exact mirror objective
 * (staying put on ties), stopping when eta no longer increases or after
 * `max_steps` moves.
 */
std::vector<int> grid_mirror_path(const PolicyDag& dag, int start, int max_steps);

/// Writes PREFIX_vertices.csv (idx,eta) and PREFIX_edges.csv
/// (from_idx,to_idx,weight). Throws std::runtime_error on I/O failure.
void export_dag(const PolicyDag& dag, const std::string& prefix);

}  // namespace mirror
