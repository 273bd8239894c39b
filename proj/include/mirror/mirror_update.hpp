#pragma once

#include "mirror/drift.hpp"
#include "mirror/mdp.hpp"
#include "mirror/neighbourhood.hpp"
#include "mirror/policy.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace mirror {

enum class SamplingKind { uniform, rho_bar };

std::string_view to_string(SamplingKind kind);
std::optional<SamplingKind> parse_sampling_kind(std::string_view name);

/// State distribution beta_pi that the update samples from.
struct SamplingSpec {
    SamplingKind kind = SamplingKind::uniform;

    /// Strictly positive distribution over all states. Throws
    /// std::invalid_argument when rho_bar leaves some state unvisited.
    Eigen::VectorXd resolve(const TabularMdp& mdp, const TabularPolicy& pi) const;

    bool operator==(const SamplingSpec&) const = default;
};

struct SolverConfig {
    int max_outer_iters = 200;     // ascent iterations per subproblem
    double grad_tol = 1e-12;       // sup norm of the projected logit gradient
    double step_init = 1.0;        // first trial step of the gradient ascent
    double backtrack_factor = 0.5;
    double finite_diff_h = 1e-6;   // central differences for the non-smooth penalty
    double max_logit = 30.0;       // logits are kept in [-max_logit, max_logit]
    int multiplier_iters = 60;     // bisection steps on the constraint multiplier

    void validate() const;
    bool operator==(const SolverConfig&) const = default;
};

struct UpdateResult {
    SoftmaxPolicy new_logits;
    TabularPolicy new_policy;
    double objective_gain = 0.0;
    Eigen::VectorXd per_state_mirror_gain;
    DriftReport drift_report;      // drift of new_policy relative to the old one
    std::vector<int> safeguarded_states;
    int solver_iters = 0;
    double multiplier = 0.0;       // constraint multiplier (0 when the ball is slack)
    bool stalled = false;          // no improving member found; new == old
    bool stationary = false;       // projected objective gradient at old is below grad_tol
};

/// [M V_pi](s) = E_{a ~ pibar} Q_pi(s, a) - nu(s) / beta(s) * D_pi(pibar | s).
double mirror_value(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                    const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta, int s);

/// All states at once, reusing the old policy's value tables.
Eigen::VectorXd mirror_values(const TabularMdp& mdp, const TabularPolicy& pi, const ValueTables& old_values,
                              const TabularPolicy& pibar, const DriftSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& beta);

/// E_{s ~ beta} [M V_pi](s).
double mirror_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                        const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Analytic gradient of mirror_objective with respect to the logits of
/// pibar. Only for drifts with a separable nu (not dirac_max).
Eigen::MatrixXd mirror_objective_gradient(const TabularMdp& mdp, const TabularPolicy& pi,
                                          const SoftmaxPolicy& pibar, const DriftSpec& spec,
                                          const Eigen::Ref<const Eigen::VectorXd>& beta);

/**
 * One mirror-learning step: maximises mirror_objective over the
 * neighbourhood of `pi`, then reverts every state whose mirror value fell
 * below the old value. Conditionals at terminal states are left unchanged.
 */
UpdateResult solve_update(const TabularMdp& mdp, const SoftmaxPolicy& pi, const DriftSpec& drift,
                          const NeighbourhoodSpec& neigh, const Eigen::Ref<const Eigen::VectorXd>& beta,
                          const SolverConfig& cfg = {});

// ---------------------------------------------------------------------------
// Sampled estimators

struct StateAction {
    int state = 0;
    int action = 0;
};

/// States drawn from beta, actions from pi_old.
std::vector<StateAction> draw_batch(const TabularMdp& mdp, const TabularPolicy& pi_old,
                                    const Eigen::Ref<const Eigen::VectorXd>& beta, int n, std::uint64_t seed);

/// q_value: ratio * Q - (nu/beta) D, whose mean is mirror_objective.
/// advantage: ratio * A - (nu/beta) D, whose mean is mirror_objective - E_beta[V].
enum class EstimatorForm { q_value, advantage };

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
};

/// Batch mean of the importance-weighted mirror objective. Throws
/// std::invalid_argument on an empty batch.
Estimate monte_carlo_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                               const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta,
                               const std::vector<StateAction>& batch, EstimatorForm form = EstimatorForm::q_value);

/// The same estimator with every (s, a) weighted by beta(s) pi(a|s).
double enumerated_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                            const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta,
                            EstimatorForm form = EstimatorForm::q_value);

/// Replay-buffer entry produced by some historical policy.
struct BufferEntry {
    int state = 0;
    int action = 0;
    double hist_prob = 0.0;  // pi_hist(action | state) at collection time
    double q_old = 0.0;      // Q_{pi_old}(state, action)
    double weight = 1.0;     // multiplicity; exact enumeration uses probabilities here
};

/// Weighted mean of pibar(a|s) / pi_hist(a|s) * Q. Throws
/// std::invalid_argument for an empty buffer or a non-positive stored
/// probability (corrupt buffer).
Estimate off_policy_estimate(const TabularPolicy& pibar, const std::vector<BufferEntry>& buffer);

}  // namespace mirror
