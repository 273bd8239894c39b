#pragma once

#include "mirror/drift.hpp"
#include "mirror/mdp.hpp"
#include "mirror/policy.hpp"

#include <optional>
#include <string_view>

namespace mirror {

enum class NeighbourhoodKind { trivial, avg_kl_ball, drift_ball, param_l2_ball };

std::string_view to_string(NeighbourhoodKind kind);
std::optional<NeighbourhoodKind> parse_neighbourhood_kind(std::string_view name);

/**
 * Closed ball N(pi) = { pibar : distance(pi, pibar) <= radius }.
 *
 *  - avg_kl_ball:   E_{s ~ rho_bar_pi} KL(pi(.|s), pibar(.|s))
 *  - drift_ball:    sum_s beta(s) D_pi(pibar | s) for drift_ref. A trivial
 *                   reference drift makes the ball all of Pi.
 *  - param_l2_ball: euclidean norm of the softmax logit difference
 *  - trivial:       N == Pi
 */
struct NeighbourhoodSpec {
    NeighbourhoodKind kind = NeighbourhoodKind::trivial;
    double radius = 0.0;
    DriftSpec drift_ref;

    static NeighbourhoodSpec trivial() { return {}; }
    static NeighbourhoodSpec avg_kl_ball(double radius);
    static NeighbourhoodSpec drift_ball(const DriftSpec& ref, double radius);
    static NeighbourhoodSpec param_l2_ball(double radius);

    void validate() const;
    bool operator==(const NeighbourhoodSpec&) const = default;
};

/// Distance of pibar from pi as measured by the ball (0 for trivial).
double neighbourhood_distance(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                              const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// radius - distance; non-negative iff pibar is a member. +inf for trivial.
double membership_margin(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                         const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta);

/// Logit-space overload; the only form that is exact for param_l2_ball
/// when the logits are clamped rather than recovered from probabilities.
double membership_margin(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const SoftmaxPolicy& pi,
                         const SoftmaxPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta);

}  // namespace mirror
