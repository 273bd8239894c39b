#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

/// Probabilities below this floor are clamped before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

/**
 * A stationary policy over a finite MDP, stored as one probability row per
 * state. Every row is a point of the action simplex.
 */
class TabularPolicy {
public:
    /// Throws std::invalid_argument unless every row is a distribution
    /// (entries >= 0, sum within 1e-12 of 1).
    explicit TabularPolicy(Eigen::MatrixXd probs);

    static TabularPolicy uniform(int num_states, int num_actions);
    /// Point mass on `actions[s]` at every state.
    static TabularPolicy deterministic(std::span<const int> actions, int num_actions);

    int num_states() const { return static_cast<int>(probs_.rows()); }
    int num_actions() const { return static_cast<int>(probs_.cols()); }

    const Eigen::MatrixXd& probs() const { return probs_; }
    double operator()(int s, int a) const { return probs_(s, a); }
    Eigen::VectorXd row(int s) const { return probs_.row(s).transpose(); }

    /// Copy of this policy with the conditional at `s` replaced.
    TabularPolicy with_row(int s, const Eigen::Ref<const Eigen::VectorXd>& dist) const;

    /// Lowest-index action of maximal probability at each state.
    std::vector<int> argmax_actions() const;

    bool operator==(const TabularPolicy&) const = default;

private:
    Eigen::MatrixXd probs_;
};

/**
 * Softmax-parameterised policy with n-1 free logits per state; the logit of
 * the last action is pinned at zero. Every row of to_simplex() is strictly
 * positive.
 */
class SoftmaxPolicy {
public:
    /// `logits` is num_states x (num_actions - 1). NaN or infinite entries
    /// are rejected with std::invalid_argument.
    explicit SoftmaxPolicy(Eigen::MatrixXd logits);

    static SoftmaxPolicy uniform(int num_states, int num_actions);
    /// Inverse of to_simplex for interior policies: logit_a = ln p_a - ln p_last.
    static SoftmaxPolicy from_simplex(const TabularPolicy& pi);

    int num_states() const { return static_cast<int>(logits_.rows()); }
    int num_actions() const { return static_cast<int>(logits_.cols()) + 1; }
    const Eigen::MatrixXd& logits() const { return logits_; }

    TabularPolicy to_simplex() const;

private:
    Eigen::MatrixXd logits_;
};

/// Numerically stable softmax of `free_logits ++ [0]`.
Eigen::VectorXd softmax_row(const Eigen::Ref<const Eigen::VectorXd>& free_logits);

TabularPolicy to_simplex(const SoftmaxPolicy& sp);

enum class DivergenceKind { kl, reverse_kl, sq_l2, sq_tv };

std::string_view to_string(DivergenceKind kind);
std::optional<DivergenceKind> parse_divergence_kind(std::string_view name);

/**
 * Statistical divergence between two action distributions.
 *
 * `p` plays the role of the old policy: kl = sum p ln(p/q), reverse_kl =
 * sum q ln(q/p). Entries are clamped to kProbabilityFloor before logarithms.
 */
double divergence(DivergenceKind kind, const Eigen::Ref<const Eigen::VectorXd>& p,
                  const Eigen::Ref<const Eigen::VectorXd>& q);

/// Max over states of the per-state divergence between the two policies.
double policy_metric(const TabularPolicy& pi1, const TabularPolicy& pi2, DivergenceKind kind);

/// True if each row is strictly positive.
bool is_interior(const TabularPolicy& pi);

}  // namespace mirror
