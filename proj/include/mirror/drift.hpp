#pragma once

#include "mirror/mdp.hpp"
#include "mirror/policy.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mirror {

enum class DriftKind { trivial, kl, reverse_kl, sq_l2, sq_tv, ppo_clip, trl_max_kl };

/// State weighting nu used to average the per-state drift.
enum class NuKind {
    match_beta,  // nu = beta (the nu/beta factor in the mirror operator is 1)
    rho_bar,     // normalised discounted visitation of the old policy
    dirac_max    // point mass on the state of largest drift, ties to the lowest index
};

std::string_view to_string(DriftKind kind);
std::string_view to_string(NuKind kind);
std::optional<DriftKind> parse_drift_kind(std::string_view name);
std::optional<NuKind> parse_nu_kind(std::string_view name);

struct DriftSpec {
    DriftKind kind = DriftKind::trivial;
    double coeff = 1.0;
    double clip_epsilon = 0.0;  // used by ppo_clip only
    NuKind nu = NuKind::match_beta;

    /// Spec with the conventional weighting for `kind` (dirac_max for
    /// trl_max_kl, match_beta otherwise) and clip_epsilon 0.2 for ppo_clip.
    static DriftSpec make(DriftKind kind, double coeff = 1.0);

    /// Throws std::invalid_argument on a violated field invariant.
    void validate() const;

    /// Kinds for which an expected drift of zero forces pibar == pi.
    bool is_positive() const;
    /// True when nu does not depend on the candidate policy.
    bool is_separable() const { return nu != NuKind::dirac_max; }

    bool operator==(const DriftSpec&) const = default;
};

/**
 * The drift functional D_pi(. | s) frozen at one state: the old conditional
 * p, the advantage row of the old policy and the per-state scale. Evaluates
 * the drift of a candidate conditional q, plus q-space derivatives where the
 * functional is differentiable (piecewise for sq_tv and ppo_clip).
 */
class LocalDrift {
public:
    LocalDrift(const DriftSpec& spec, Eigen::VectorXd old_row, Eigen::VectorXd adv_row, double scale);

    double value(const Eigen::Ref<const Eigen::VectorXd>& q) const;
    Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& q) const;
    Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& q) const;

    const Eigen::VectorXd& old_row() const { return old_; }

private:
    DriftSpec spec_;
    Eigen::VectorXd old_;
    Eigen::VectorXd adv_;
    double scale_;
};

/// Per-state multiplier in front of the divergence: coeff for the plain
/// kinds, coeff * (1 - gamma) * C_pi for trl_max_kl with
/// C_pi = 4 gamma max|A_pi| / (1 - gamma)^2.
double drift_scale(const DriftSpec& spec, const TabularMdp& mdp, const Eigen::Ref<const Eigen::MatrixXd>& adv);

/// D_pi(pibar | s). `adv` must be the advantage table of `pi`.
double drift_at_state(const DriftSpec& spec, const TabularMdp& mdp, const Eigen::Ref<const Eigen::MatrixXd>& adv,
                      const TabularPolicy& pi, const TabularPolicy& pibar, int s);

/// Vector of D_pi(pibar | s) over all states.
Eigen::VectorXd drift_per_state(const DriftSpec& spec, const TabularMdp& mdp,
                                const Eigen::Ref<const Eigen::MatrixXd>& adv, const TabularPolicy& pi,
                                const TabularPolicy& pibar);

struct DriftReport {
    Eigen::VectorXd per_state;
    double expected = 0.0;
    Eigen::VectorXd nu_weights;
};

/// Resolves nu for the given per-state drifts. `rho_bar_old` is only read
/// for NuKind::rho_bar.
Eigen::VectorXd resolve_nu(NuKind nu, const Eigen::Ref<const Eigen::VectorXd>& beta,
                           const Eigen::Ref<const Eigen::VectorXd>& rho_bar_old,
                           const Eigen::Ref<const Eigen::VectorXd>& per_state);

/// Expected drift D^nu_pi(pibar). `beta` must be strictly positive.
DriftReport expected_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                           const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Same as above with the old policy's values precomputed.
DriftReport expected_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                           const ValueTables& old_values, const TabularPolicy& pibar,
                           const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Throws std::invalid_argument unless beta is a strictly positive distribution.
void check_sampling_distribution(const TabularMdp& mdp, const Eigen::Ref<const Eigen::VectorXd>& beta);

struct DriftValidation {
    double min_drift = 0.0;              // most negative drift seen over random pibar
    double max_quotient_h = 0.0;         // max |(D(pi + h v) - D(pi)) / h|
    double max_quotient_h_tenth = 0.0;   // same at h / 10
    double identity_drift = 0.0;         // max |D_pi(pi | s)|
    bool nonnegative = false;
    bool zero_gradient = false;
    bool passed() const { return nonnegative && zero_gradient; }
};

/**
 * Randomised check of the two drift-functional conditions at an interior
 * policy: nonnegativity over `trials` random candidates, and vanishing
 * directional difference quotients along random simplex-tangent directions
 * (unit l1 norm) at step h and h/10. The quotient bound is 10 h.
 */
DriftValidation validate_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi, int trials,
                               double h, std::uint64_t seed);

}  // namespace mirror
