#pragma once

#include "mirror/policy.hpp"

#include <Eigen/Core>

#include <vector>

namespace mirror {

/**
 * Finite discounted MDP <S, A, r, P, gamma, d>.
 *
 * transition[a](s, s') is P(s' | s, a). Terminal states are absorbing with
 * zero reward under every action, so every environment stays a stationary
 * infinite-horizon problem.
 */
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    Eigen::MatrixXd reward;                    // num_states x num_actions
    std::vector<Eigen::MatrixXd> transition;   // one num_states x num_states block per action
    double gamma = 0.0;
    Eigen::VectorXd initial_dist;
    std::vector<int> terminal_states;          // sorted, unique

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    bool is_terminal(int s) const;
    /// max |r(s, a)|.
    double reward_bound() const;
    /// Indices of the non-terminal states, ascending.
    std::vector<int> decision_states() const;

    /// P(s' | s, a) as a row vector.
    auto next_state_row(int s, int a) const { return transition[static_cast<std::size_t>(a)].row(s); }
};

struct ValueTables {
    Eigen::VectorXd v;    // V_pi(s)
    Eigen::MatrixXd q;    // Q_pi(s, a)
    Eigen::MatrixXd adv;  // A_pi(s, a) = Q_pi(s, a) - V_pi(s)
};

/// Throws std::invalid_argument if the policy shape does not match the MDP.
void check_policy_shape(const TabularMdp& mdp, const TabularPolicy& pi);

/// Expected one-step reward r_pi(s) and state transition matrix P_pi.
Eigen::VectorXd policy_reward(const TabularMdp& mdp, const TabularPolicy& pi);
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& pi);

/// Exact policy evaluation: solves (I - gamma P_pi) v = r_pi with a dense LU.
ValueTables evaluate_policy(const TabularMdp& mdp, const TabularPolicy& pi);

/// Q-table implied by a state-value vector: r + gamma * P v.
Eigen::MatrixXd q_from_values(const TabularMdp& mdp, const Eigen::Ref<const Eigen::VectorXd>& v);

/// eta(pi) = sum_s d(s) V_pi(s).
double expected_return(const TabularMdp& mdp, const TabularPolicy& pi);

/**
 * Discounted state visitation rho_pi = sum_t gamma^t Pr(s_t = s), from
 * rho = d + gamma P_pi^T rho. With `normalized` the result is scaled by
 * (1 - gamma) and sums to one.
 */
Eigen::VectorXd discounted_visitation(const TabularMdp& mdp, const TabularPolicy& pi, bool normalized);

struct OptimalSolution {
    ValueTables values;
    TabularPolicy policy;  // greedy w.r.t. Q*, ties to the lowest action
    double eta_star = 0.0;
    int iterations = 0;
};

/// Bellman-max iteration until the sup-norm change drops below
/// tol * (1 - gamma) / (2 gamma), so V is within tol of V*.
OptimalSolution value_iteration(const TabularMdp& mdp, double tol);

/// Deterministic argmax_a Q_pi(s, a) policy, ties to the lowest action index.
TabularPolicy greedy_step(const TabularMdp& mdp, const TabularPolicy& pi);

/// Greedy actions of a Q-table; ties to the lowest index.
std::vector<int> greedy_actions(const Eigen::Ref<const Eigen::MatrixXd>& q);

}  // namespace mirror
