#include "doctest.h"

#include "mirror/environments.hpp"
#include "mirror/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>

using namespace mirror;

namespace {

/// Iterative policy evaluation, independent of the LU solve under test.
Eigen::VectorXd iterate_values(const TabularMdp& mdp, const TabularPolicy& pi, int sweeps) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.num_states);
    for (int k = 0; k < sweeps; ++k) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.num_states);
        for (int s = 0; s < mdp.num_states; ++s) {
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double backup = mdp.reward(s, a) + mdp.gamma * mdp.transition[a].row(s).dot(v);
                next(s) += pi(s, a) * backup;
            }
        }
        v = next;
    }
    return v;
}

/// Exact return of a deterministic policy in a deterministic MDP: walk the
/// trajectory until it closes a cycle, then sum the cycle geometrically.
double deterministic_rollout(const TabularMdp& mdp, const std::vector<int>& actions, int start) {
    std::vector<int> states;
    std::vector<double> rewards;
    int s = start;
    for (;;) {
        const auto seen = std::find(states.begin(), states.end(), s);
        if (seen != states.end()) {
            const std::size_t j = static_cast<std::size_t>(seen - states.begin());
            double prefix = 0.0, cycle = 0.0, discount = 1.0;
            for (std::size_t t = 0; t < rewards.size(); ++t) {
                (t < j ? prefix : cycle) += discount * rewards[t];
                discount *= mdp.gamma;
            }
            const double period = std::pow(mdp.gamma, static_cast<double>(rewards.size() - j));
            return prefix + cycle / (1.0 - period);
        }
        states.push_back(s);
        const int a = actions[static_cast<std::size_t>(s)];
        rewards.push_back(mdp.reward(s, a));
        int next = 0;
        mdp.transition[static_cast<std::size_t>(a)].row(s).maxCoeff(&next);
        s = next;
    }
}

TabularMdp two_state_cycle(double gamma) {
    TabularMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 1;
    mdp.reward = Eigen::MatrixXd::Zero(2, 1);
    mdp.transition = {Eigen::MatrixXd(2, 2)};
    mdp.transition[0] << 0, 1, 1, 0;
    mdp.gamma = gamma;
    mdp.initial_dist = Eigen::Vector2d(0.5, 0.5);
    return mdp;
}

}  // namespace

TEST_CASE("validate rejects broken MDPs") {
    TabularMdp mdp = two_state_cycle(0.9);
    CHECK_NOTHROW(mdp.validate());

    TabularMdp bad_gamma = mdp;
    bad_gamma.gamma = 1.0;
    CHECK_THROWS_AS(bad_gamma.validate(), std::invalid_argument);

    TabularMdp bad_row = mdp;
    bad_row.transition[0](0, 1) = 0.9;
    CHECK_THROWS_AS(bad_row.validate(), std::invalid_argument);

    TabularMdp bad_init = mdp;
    bad_init.initial_dist = Eigen::Vector2d(0.5, 0.6);
    CHECK_THROWS_AS(bad_init.validate(), std::invalid_argument);

    TabularMdp bad_terminal = build_single_step();
    bad_terminal.reward(1, 0) = 1.0;
    CHECK_THROWS_AS(bad_terminal.validate(), std::invalid_argument);
}

TEST_CASE("single-step policy evaluation") {
    const TabularMdp mdp = build_single_step();
    const ValueTables uniform = evaluate_policy(mdp, TabularPolicy::uniform(2, 5));
    CHECK(uniform.v(0) == doctest::Approx(3.2).epsilon(1e-14));
    CHECK(expected_return(mdp, TabularPolicy::uniform(2, 5)) == doctest::Approx(3.2).epsilon(1e-14));
    const std::vector<int> best{0, 0};
    CHECK(evaluate_policy(mdp, TabularPolicy::deterministic(best, 5)).v(0) == doctest::Approx(10.0));
}

TEST_CASE("chain: always right from the right-most state earns 10") {
    const TabularMdp mdp = build_chain();
    const std::vector<int> right(6, 2);
    CHECK(evaluate_policy(mdp, TabularPolicy::deterministic(right, 3)).v(4) == doctest::Approx(10.0));
}

TEST_CASE("value tables satisfy their identities") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TabularMdp mdp = build_random_mdp(5, 3, 0.9, seed);
        std::mt19937_64 rng(seed);
        std::exponential_distribution<double> expo(1.0);
        Eigen::MatrixXd probs(5, 3);
        for (Eigen::Index i = 0; i < probs.size(); ++i) probs.data()[i] = expo(rng);
        for (int s = 0; s < 5; ++s) probs.row(s) /= probs.row(s).sum();
        const TabularPolicy pi(probs);
        const ValueTables t = evaluate_policy(mdp, pi);

        CHECK(((t.q.colwise() - t.v) - t.adv).cwiseAbs().maxCoeff() == 0.0);
        for (int s = 0; s < 5; ++s) CHECK(std::abs(pi.probs().row(s).dot(t.adv.row(s))) < 1e-10);
        const Eigen::VectorXd residual =
            t.v - (policy_reward(mdp, pi) + mdp.gamma * policy_transition(mdp, pi) * t.v);
        CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);
        CHECK(t.v.cwiseAbs().maxCoeff() <= mdp.reward_bound() / (1 - mdp.gamma));
        CHECK((t.v - iterate_values(mdp, pi, 600)).cwiseAbs().maxCoeff() < 1e-9);

        const OptimalSolution opt = value_iteration(mdp, 1e-10);
        CHECK((t.v.array() <= opt.values.v.array() + 1e-8).all());
        const TabularPolicy greedy = greedy_step(mdp, pi);
        CHECK(expected_return(mdp, greedy) >= expected_return(mdp, pi) - 1e-10);
    }
}

TEST_CASE("discounted visitation") {
    const TabularMdp single = build_single_step();
    const Eigen::VectorXd rho = discounted_visitation(single, TabularPolicy::uniform(2, 5), false);
    CHECK(rho(0) == doctest::Approx(1.0));  // the decision state is left after one step
    CHECK(rho.sum() == doctest::Approx(1.0 / (1.0 - single.gamma)).epsilon(1e-10));

    const TabularMdp cycle = two_state_cycle(0.9);
    const TabularPolicy pi = TabularPolicy::uniform(2, 1);
    Eigen::VectorXd brute = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd dist = cycle.initial_dist;
    double discount = 1.0;
    for (int t = 0; t < 10000; ++t) {
        brute += discount * dist;
        dist = cycle.transition[0].transpose() * dist;
        discount *= cycle.gamma;
    }
    CHECK((discounted_visitation(cycle, pi, false) - brute).cwiseAbs().maxCoeff() < 1e-10);

    const TabularMdp mdp = build_random_mdp(4, 2, 0.8, 9);
    CHECK(discounted_visitation(mdp, TabularPolicy::uniform(4, 2), true).sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("value iteration: single-step and chain against enumeration") {
    CHECK(value_iteration(build_single_step(), 1e-12).eta_star == doctest::Approx(10.0).epsilon(1e-12));

    // Exhaustive search over the 3^5 deterministic chain policies.
    const TabularMdp chain = build_chain();
    double best = -1e9;
    std::vector<int> actions(6, 0);
    for (int code = 0; code < 243; ++code) {
        int c = code;
        for (int s = 0; s < 5; ++s) {
            actions[s] = c % 3;
            c /= 3;
        }
        double eta = 0.0;
        for (int s = 0; s < 5; ++s) eta += chain.initial_dist(s) * deterministic_rollout(chain, actions, s);
        best = std::max(best, eta);
    }
    const double eta_star = value_iteration(chain, 1e-12).eta_star;
    CHECK(std::abs(eta_star - best) < 1e-6);
    CHECK(std::abs(eta_star - 9.7) < 0.15);
}

TEST_CASE("value iteration: gridworld against shortest paths") {
    const GridSpec spec;
    const TabularMdp grid = build_gridworld(spec);
    // Breadth-first distances to the goal avoiding the bomb; each step pays -1.
    std::map<Cell, int> dist{{spec.goal_cell, 0}};
    std::deque<Cell> frontier{spec.goal_cell};
    while (!frontier.empty()) {
        const Cell c = frontier.front();
        frontier.pop_front();
        for (const Cell n : {Cell{c.first + 1, c.second}, Cell{c.first - 1, c.second}, Cell{c.first, c.second + 1},
                             Cell{c.first, c.second - 1}}) {
            if (!spec.state_of(n) || n == spec.bomb_cell || dist.count(n)) continue;
            dist[n] = dist[c] + 1;
            frontier.push_back(n);
        }
    }
    const OptimalSolution opt = value_iteration(grid, 1e-12);
    double eta = 0.0;
    int cells = 0;
    for (const auto& [cell, steps] : dist) {
        if (cell == spec.goal_cell) continue;
        const double v = -(1.0 - std::pow(grid.gamma, steps)) / (1.0 - grid.gamma);
        CHECK(opt.values.v(*spec.state_of(cell)) == doctest::Approx(v).epsilon(1e-9));
        eta += v;
        ++cells;
    }
    CHECK(cells == 19);
    CHECK(opt.eta_star == doctest::Approx(eta / cells).epsilon(1e-9));
    CHECK(opt.eta_star >= -10.0);
    CHECK(opt.eta_star <= -5.0);
}

TEST_CASE("greedy step") {
    const TabularMdp single = build_single_step();
    const TabularPolicy g = greedy_step(single, TabularPolicy::uniform(2, 5));
    CHECK(g(0, 0) == 1.0);

    const TabularMdp chain = build_chain();
    const OptimalSolution opt = value_iteration(chain, 1e-12);
    CHECK(greedy_step(chain, opt.policy).argmax_actions() == opt.policy.argmax_actions());

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularMdp mdp = build_random_mdp(3, 3, 0.7, seed + 100);
        const TabularPolicy pi = TabularPolicy::uniform(3, 3);
        const ValueTables t = evaluate_policy(mdp, pi);
        const TabularPolicy greedy = greedy_step(mdp, pi);
        for (int s = 0; s < 3; ++s) {
            int best = 0;
            for (int a = 1; a < 3; ++a) {
                if (t.q(s, a) > t.q(s, best)) best = a;
            }
            CHECK(greedy(s, best) == 1.0);
        }
    }
}
