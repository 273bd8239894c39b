#include "mirror/environments.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <stdexcept>

namespace mirror {

namespace {

TabularMdp empty_mdp(int num_states, int num_actions, double gamma) {
    TabularMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.reward = Eigen::MatrixXd::Zero(num_states, num_actions);
    mdp.transition.assign(static_cast<std::size_t>(num_actions), Eigen::MatrixXd::Zero(num_states, num_states));
    mdp.gamma = gamma;
    mdp.initial_dist = Eigen::VectorXd::Zero(num_states);
    return mdp;
}

void set_move(TabularMdp& mdp, int s, int a, int next, double reward) {
    mdp.transition[static_cast<std::size_t>(a)](s, next) = 1.0;
    mdp.reward(s, a) = reward;
}

void make_absorbing(TabularMdp& mdp, int s) {
    for (int a = 0; a < mdp.num_actions; ++a) set_move(mdp, s, a, s, 0.0);
    mdp.terminal_states.push_back(s);
}

bool on_grid(const GridSpec& g, Cell c) {
    return c.first >= 0 && c.first < g.height && c.second >= 0 && c.second < g.width;
}

Cell shifted(Cell c, Move m) {
    switch (m) {
        case Move::up: return {c.first + 1, c.second};
        case Move::down: return {c.first - 1, c.second};
        case Move::left: return {c.first, c.second - 1};
        case Move::right: return {c.first, c.second + 1};
    }
    return c;
}

constexpr Move kMoves[] = {Move::up, Move::down, Move::left, Move::right};

}  // namespace

bool GridSpec::is_barrier(Cell c) const {
    return std::find(barrier_cells.begin(), barrier_cells.end(), c) != barrier_cells.end();
}

std::optional<int> GridSpec::state_of(Cell c) const {
    if (!on_grid(*this, c) || is_barrier(c)) return std::nullopt;
    int index = 0;
    for (int r = 0; r < height; ++r) {
        for (int col = 0; col < width; ++col) {
            if (is_barrier({r, col})) continue;
            if (Cell{r, col} == c) return index;
            ++index;
        }
    }
    return std::nullopt;
}

Cell GridSpec::cell_of(int state) const {
    int index = 0;
    for (int r = 0; r < height; ++r) {
        for (int col = 0; col < width; ++col) {
            if (is_barrier({r, col})) continue;
            if (index == state) return {r, col};
            ++index;
        }
    }
    throw std::invalid_argument("GridSpec::cell_of: state out of range");
}

int GridSpec::num_states() const {
    int count = 0;
    for (int r = 0; r < height; ++r) {
        for (int col = 0; col < width; ++col) count += is_barrier({r, col}) ? 0 : 1;
    }
    return count;
}

void GridSpec::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("grid dimensions must be positive");
    if (!on_grid(*this, goal_cell) || !on_grid(*this, bomb_cell)) {
        throw std::invalid_argument("goal and bomb must lie on the grid");
    }
    if (goal_cell == bomb_cell) throw std::invalid_argument("goal and bomb must differ");
    for (const Cell& c : barrier_cells) {
        if (!on_grid(*this, c)) throw std::invalid_argument("barrier cell off the grid");
        if (c == goal_cell || c == bomb_cell) throw std::invalid_argument("barrier overlaps goal or bomb");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");

    // Reverse search from the goal through free cells (the bomb ends episodes).
    std::vector<Cell> reached{goal_cell};
    std::deque<Cell> frontier{goal_cell};
    while (!frontier.empty()) {
        const Cell c = frontier.front();
        frontier.pop_front();
        for (const Move m : kMoves) {
            const Cell n = shifted(c, m);
            if (!on_grid(*this, n) || is_barrier(n) || n == bomb_cell) continue;
            if (std::find(reached.begin(), reached.end(), n) != reached.end()) continue;
            reached.push_back(n);
            frontier.push_back(n);
        }
    }
    for (int r = 0; r < height; ++r) {
        for (int col = 0; col < width; ++col) {
            const Cell c{r, col};
            if (is_barrier(c) || c == bomb_cell) continue;
            if (std::find(reached.begin(), reached.end(), c) == reached.end()) {
                throw std::invalid_argument("free cell (" + std::to_string(r) + ", " + std::to_string(col) +
                                            ") cannot reach the goal");
            }
        }
    }
}

TabularMdp build_single_step() {
    TabularMdp mdp = empty_mdp(2, 5, 0.999);
    const double rewards[] = {10.0, 0.0, 1.0, 0.0, 5.0};
    for (int a = 0; a < 5; ++a) set_move(mdp, 0, a, 1, rewards[a]);
    make_absorbing(mdp, 1);
    mdp.initial_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

TabularMdp build_chain() {
    constexpr int kCells = 5;
    constexpr int kTerminal = kCells;
    TabularMdp mdp = empty_mdp(kCells + 1, 3, 0.999);
    for (int s = 0; s < kCells; ++s) {
        if (s == 0) {
            set_move(mdp, s, 0, kTerminal, -10.0);
        } else {
            set_move(mdp, s, 0, s - 1, 0.1);
        }
        set_move(mdp, s, 1, s, 0.0);
        if (s == kCells - 1) {
            set_move(mdp, s, 2, kTerminal, 10.0);
        } else {
            set_move(mdp, s, 2, s + 1, -0.1);
        }
        mdp.initial_dist(s) = 1.0 / kCells;
    }
    make_absorbing(mdp, kTerminal);
    mdp.validate();
    return mdp;
}

TabularMdp build_gridworld(const GridSpec& spec) {
    spec.validate();
    const int n = spec.num_states();
    TabularMdp mdp = empty_mdp(n, 4, spec.gamma);
    const int goal = *spec.state_of(spec.goal_cell);
    const int bomb = *spec.state_of(spec.bomb_cell);
    int free_cells = 0;
    for (int s = 0; s < n; ++s) {
        if (s == goal || s == bomb) continue;
        ++free_cells;
        const Cell c = spec.cell_of(s);
        for (int a = 0; a < 4; ++a) {
            const Cell target = shifted(c, kMoves[a]);
            const int next = spec.state_of(target).value_or(s);
            set_move(mdp, s, a, next, next == bomb ? spec.bomb_reward : spec.step_reward);
        }
    }
    for (int s = 0; s < n; ++s) {
        if (s != goal && s != bomb) mdp.initial_dist(s) = 1.0 / free_cells;
    }
    make_absorbing(mdp, std::min(goal, bomb));
    make_absorbing(mdp, std::max(goal, bomb));
    mdp.validate();
    return mdp;
}

std::string gridworld_map(const GridSpec& spec) {
    std::string out;
    for (int r = spec.height - 1; r >= 0; --r) {
        for (int c = 0; c < spec.width; ++c) {
            const Cell cell{r, c};
            if (spec.is_barrier(cell)) {
                out += '#';
            } else if (cell == spec.goal_cell) {
                out += 'G';
            } else if (cell == spec.bomb_cell) {
                out += 'B';
            } else {
                out += '.';
            }
        }
        out += '\n';
    }
    return out;
}

TabularMdp build_bandit() {
    TabularMdp mdp = empty_mdp(1, 2, 0.5);
    set_move(mdp, 0, 0, 0, 1.0);
    set_move(mdp, 0, 1, 0, 0.0);
    mdp.initial_dist(0) = 1.0;
    mdp.validate();
    return mdp;
}

TabularMdp build_random_mdp(int num_states, int num_actions, double gamma, std::uint64_t seed) {
    if (num_states < 1 || num_states > 6 || num_actions < 2 || num_actions > 4) {
        throw std::invalid_argument("build_random_mdp: need 1 <= states <= 6 and 2 <= actions <= 4");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("build_random_mdp: gamma must lie in [0, 1)");
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    TabularMdp mdp = empty_mdp(num_states, num_actions, gamma);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            Eigen::VectorXd row(num_states);
            for (int t = 0; t < num_states; ++t) row(t) = expo(rng);
            mdp.transition[static_cast<std::size_t>(a)].row(s) = (row / row.sum()).transpose();
            mdp.reward(s, a) = unit(rng);
        }
    }
    mdp.initial_dist.setConstant(1.0 / num_states);
    mdp.validate();
    return mdp;
}

const std::vector<std::string>& environment_names() {
    static const std::vector<std::string> names{"single-step", "chain", "gridworld", "bandit", "random"};
    return names;
}

TabularMdp make_env(std::string_view name, std::uint64_t seed) {
    if (name == "single-step") return build_single_step();
    if (name == "chain") return build_chain();
    if (name == "gridworld") return build_gridworld();
    if (name == "bandit") return build_bandit();
    if (name == "random") return build_random_mdp(4, 3, 0.9, seed);
    throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

}  // namespace mirror
