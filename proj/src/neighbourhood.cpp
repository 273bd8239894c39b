#include "mirror/neighbourhood.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mirror {

std::string_view to_string(NeighbourhoodKind kind) {
    switch (kind) {
        case NeighbourhoodKind::trivial: return "trivial";
        case NeighbourhoodKind::avg_kl_ball: return "avg_kl_ball";
        case NeighbourhoodKind::drift_ball: return "drift_ball";
        case NeighbourhoodKind::param_l2_ball: return "param_l2_ball";
    }
    return "unknown";
}

std::optional<NeighbourhoodKind> parse_neighbourhood_kind(std::string_view name) {
    for (const auto kind : {NeighbourhoodKind::trivial, NeighbourhoodKind::avg_kl_ball,
                            NeighbourhoodKind::drift_ball, NeighbourhoodKind::param_l2_ball}) {
        if (name == to_string(kind)) return kind;
    }
    if (name == "avg-kl-ball" || name == "kl_ball" || name == "kl-ball") return NeighbourhoodKind::avg_kl_ball;
    if (name == "drift-ball") return NeighbourhoodKind::drift_ball;
    if (name == "param-l2-ball") return NeighbourhoodKind::param_l2_ball;
    return std::nullopt;
}

NeighbourhoodSpec NeighbourhoodSpec::avg_kl_ball(double radius) {
    return {NeighbourhoodKind::avg_kl_ball, radius, DriftSpec{}};
}

NeighbourhoodSpec NeighbourhoodSpec::drift_ball(const DriftSpec& ref, double radius) {
    return {NeighbourhoodKind::drift_ball, radius, ref};
}

NeighbourhoodSpec NeighbourhoodSpec::param_l2_ball(double radius) {
    return {NeighbourhoodKind::param_l2_ball, radius, DriftSpec{}};
}

void NeighbourhoodSpec::validate() const {
    if (kind == NeighbourhoodKind::trivial) return;
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw std::invalid_argument("neighbourhood radius must be positive and finite");
    }
    if (kind == NeighbourhoodKind::drift_ball) {
        drift_ref.validate();
    }
}

namespace {

double logit_distance(const SoftmaxPolicy& pi, const SoftmaxPolicy& pibar) {
    if (pi.logits().rows() != pibar.logits().rows() || pi.logits().cols() != pibar.logits().cols()) {
        throw std::invalid_argument("param_l2_ball: logit shape mismatch");
    }
    return (pi.logits() - pibar.logits()).norm();
}

}  // namespace

double neighbourhood_distance(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                              const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    spec.validate();
    check_policy_shape(mdp, pi);
    check_policy_shape(mdp, pibar);
    switch (spec.kind) {
        case NeighbourhoodKind::trivial: return 0.0;
        case NeighbourhoodKind::avg_kl_ball: {
            const Eigen::VectorXd rho_bar = discounted_visitation(mdp, pi, true);
            double total = 0.0;
            for (int s = 0; s < mdp.num_states; ++s) {
                total += rho_bar(s) * divergence(DivergenceKind::kl, pi.row(s), pibar.row(s));
            }
            return total;
        }
        case NeighbourhoodKind::drift_ball: {
            if (spec.drift_ref.kind == DriftKind::trivial) return 0.0;
            check_sampling_distribution(mdp, beta);
            const ValueTables values = evaluate_policy(mdp, pi);
            return beta.dot(drift_per_state(spec.drift_ref, mdp, values.adv, pi, pibar));
        }
        case NeighbourhoodKind::param_l2_ball:
            return logit_distance(SoftmaxPolicy::from_simplex(pi), SoftmaxPolicy::from_simplex(pibar));
    }
    return 0.0;
}

double membership_margin(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                         const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (spec.kind == NeighbourhoodKind::trivial) return std::numeric_limits<double>::infinity();
    return spec.radius - neighbourhood_distance(spec, mdp, pi, pibar, beta);
}

double membership_margin(const NeighbourhoodSpec& spec, const TabularMdp& mdp, const SoftmaxPolicy& pi,
                         const SoftmaxPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (spec.kind == NeighbourhoodKind::param_l2_ball) {
        spec.validate();
        return spec.radius - logit_distance(pi, pibar);
    }
    return membership_margin(spec, mdp, pi.to_simplex(), pibar.to_simplex(), beta);
}

}  // namespace mirror
