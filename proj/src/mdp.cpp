#include "mirror/mdp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mirror {

void TabularMdp::validate() const {
    if (num_states <= 0 || num_actions <= 0) {
        throw std::invalid_argument("mdp: state and action counts must be positive");
    }
    if (reward.rows() != num_states || reward.cols() != num_actions) {
        throw std::invalid_argument("mdp: reward table has the wrong shape");
    }
    if (!reward.allFinite()) {
        throw std::invalid_argument("mdp: rewards must be finite");
    }
    if (static_cast<int>(transition.size()) != num_actions) {
        throw std::invalid_argument("mdp: need one transition block per action");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("mdp: gamma must lie in [0, 1)");
    }
    for (int a = 0; a < num_actions; ++a) {
        const auto& block = transition[static_cast<std::size_t>(a)];
        if (block.rows() != num_states || block.cols() != num_states) {
            throw std::invalid_argument("mdp: transition block has the wrong shape");
        }
        for (int s = 0; s < num_states; ++s) {
            if ((block.row(s).array() < 0.0).any()) {
                throw std::invalid_argument("mdp: negative transition probability at state " +
                                            std::to_string(s));
            }
            if (std::abs(block.row(s).sum() - 1.0) > 1e-12) {
                throw std::invalid_argument("mdp: transition row (" + std::to_string(s) + ", " +
                                            std::to_string(a) + ") does not sum to 1");
            }
        }
    }
    if (initial_dist.size() != num_states || (initial_dist.array() < 0.0).any() ||
        std::abs(initial_dist.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("mdp: initial distribution is not a distribution over states");
    }
    if (!std::is_sorted(terminal_states.begin(), terminal_states.end()) ||
        std::adjacent_find(terminal_states.begin(), terminal_states.end()) != terminal_states.end()) {
        throw std::invalid_argument("mdp: terminal state list must be sorted and unique");
    }
    for (const int t : terminal_states) {
        if (t < 0 || t >= num_states) {
            throw std::invalid_argument("mdp: terminal state index out of range");
        }
        for (int a = 0; a < num_actions; ++a) {
            if (reward(t, a) != 0.0 || transition[static_cast<std::size_t>(a)](t, t) != 1.0) {
                throw std::invalid_argument("mdp: terminal state " + std::to_string(t) +
                                            " must self-loop with zero reward");
            }
        }
    }
}

bool TabularMdp::is_terminal(int s) const {
    return std::binary_search(terminal_states.begin(), terminal_states.end(), s);
}

double TabularMdp::reward_bound() const { return reward.cwiseAbs().maxCoeff(); }

std::vector<int> TabularMdp::decision_states() const {
    std::vector<int> out;
    for (int s = 0; s < num_states; ++s) {
        if (!is_terminal(s)) out.push_back(s);
    }
    return out;
}

void check_policy_shape(const TabularMdp& mdp, const TabularPolicy& pi) {
    if (pi.num_states() != mdp.num_states || pi.num_actions() != mdp.num_actions) {
        throw std::invalid_argument("policy shape " + std::to_string(pi.num_states()) + "x" +
                                    std::to_string(pi.num_actions()) + " does not match mdp " +
                                    std::to_string(mdp.num_states) + "x" + std::to_string(mdp.num_actions));
    }
}

Eigen::VectorXd policy_reward(const TabularMdp& mdp, const TabularPolicy& pi) {
    return mdp.reward.cwiseProduct(pi.probs()).rowwise().sum();
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& pi) {
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.num_states, mdp.num_states);
    for (int a = 0; a < mdp.num_actions; ++a) {
        p_pi += pi.probs().col(a).asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
    }
    return p_pi;
}

Eigen::MatrixXd q_from_values(const TabularMdp& mdp, const Eigen::Ref<const Eigen::VectorXd>& v) {
    Eigen::MatrixXd q(mdp.num_states, mdp.num_actions);
    for (int a = 0; a < mdp.num_actions; ++a) {
        q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[static_cast<std::size_t>(a)] * v);
    }
    return q;
}

ValueTables evaluate_policy(const TabularMdp& mdp, const TabularPolicy& pi) {
    check_policy_shape(mdp, pi);
    const Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * policy_transition(mdp, pi);
    ValueTables out;
    out.v = system.partialPivLu().solve(policy_reward(mdp, pi));
    out.q = q_from_values(mdp, out.v);
    out.adv = out.q.colwise() - out.v;
    return out;
}

double expected_return(const TabularMdp& mdp, const TabularPolicy& pi) {
    return mdp.initial_dist.dot(evaluate_policy(mdp, pi).v);
}

Eigen::VectorXd discounted_visitation(const TabularMdp& mdp, const TabularPolicy& pi, bool normalized) {
    check_policy_shape(mdp, pi);
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(mdp.num_states, mdp.num_states) -
                                   mdp.gamma * policy_transition(mdp, pi).transpose();
    Eigen::VectorXd rho = system.partialPivLu().solve(mdp.initial_dist);
    if (normalized) rho *= (1.0 - mdp.gamma);
    return rho;
}

std::vector<int> greedy_actions(const Eigen::Ref<const Eigen::MatrixXd>& q) {
    std::vector<int> out(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (Eigen::Index a = 1; a < q.cols(); ++a) {
            if (q(s, a) > q(s, best)) best = static_cast<int>(a);
        }
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

OptimalSolution value_iteration(const TabularMdp& mdp, double tol) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("value_iteration: tol must be positive");
    }
    mdp.validate();
    // gamma == 0 converges after one backup; guard the threshold division.
    const double threshold = mdp.gamma > 0.0 ? tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma) : tol;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
    int iterations = 0;
    while (true) {
        const Eigen::VectorXd next = q_from_values(mdp, v).rowwise().maxCoeff();
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = next;
        ++iterations;
        if (change < threshold) break;
    }
    const auto actions = greedy_actions(q_from_values(mdp, v));
    TabularPolicy greedy = TabularPolicy::deterministic(actions, mdp.num_actions);

    OptimalSolution out{ValueTables{}, greedy, 0.0, iterations};
    out.values.v = v;
    out.values.q = q_from_values(mdp, v);
    out.values.adv = out.values.q.colwise() - v;
    out.eta_star = mdp.initial_dist.dot(v);
    return out;
}

TabularPolicy greedy_step(const TabularMdp& mdp, const TabularPolicy& pi) {
    const auto values = evaluate_policy(mdp, pi);
    return TabularPolicy::deterministic(greedy_actions(values.q), mdp.num_actions);
}

}  // namespace mirror
