#pragma once

#include "mirror/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mirror {

/// (row, col) with rows counted from the bottom of the grid.
using Cell = std::pair<int, int>;

struct GridSpec {
    int width = 5;
    int height = 5;
    std::vector<Cell> barrier_cells{{3, 1}, {3, 2}, {3, 3}, {3, 4}};
    Cell goal_cell{4, 4};
    Cell bomb_cell{0, 0};
    double step_reward = -1.0;
    double bomb_reward = -100.0;
    double gamma = 0.999;

    /// Throws std::invalid_argument for overlapping special cells, cells off
    /// the grid, or a free cell that cannot reach the goal.
    void validate() const;

    bool is_barrier(Cell c) const;
    /// State index of a non-barrier cell; barrier cells are not states.
    std::optional<int> state_of(Cell c) const;
    /// Inverse of state_of.
    Cell cell_of(int state) const;
    int num_states() const;
};

/// Gridworld actions, in index order.
enum class Move { up, down, left, right };

/// One decision state with rewards 10, 0, 1, 0, 5 followed by an absorbing terminal.
TabularMdp build_single_step();

/// Five states in a line plus a terminal. Actions left / stay / right pay
/// +0.1 / 0 / -0.1; leaving on the left pays -10, on the right +10.
TabularMdp build_chain();

TabularMdp build_gridworld(const GridSpec& spec = {});

/// Rows from the top; '#' barrier, 'G' goal, 'B' bomb, '.' free.
std::string gridworld_map(const GridSpec& spec = {});

/// One state, two self-looping actions paying 1 and 0, gamma 0.5.
TabularMdp build_bandit();

/// Transition rows from a flat Dirichlet, rewards uniform in [-1, 1], uniform
/// initial distribution, no terminal states. 1 <= num_states <= 6 and
/// 2 <= num_actions <= 4.
TabularMdp build_random_mdp(int num_states, int num_actions, double gamma, std::uint64_t seed);

/// Environment names accepted by make_env.
const std::vector<std::string>& environment_names();

/// Builds "single-step", "chain", "gridworld", "bandit" or "random" (the
/// last one a 4-state, 3-action MDP with gamma 0.9 drawn from `seed`).
TabularMdp make_env(std::string_view name, std::uint64_t seed = 0);

}  // namespace mirror
