#include "mirror/drift.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mirror {

std::string_view to_string(DriftKind kind) {
    switch (kind) {
        case DriftKind::trivial: return "trivial";
        case DriftKind::kl: return "kl";
        case DriftKind::reverse_kl: return "reverse_kl";
        case DriftKind::sq_l2: return "sq_l2";
        case DriftKind::sq_tv: return "sq_tv";
        case DriftKind::ppo_clip: return "ppo_clip";
        case DriftKind::trl_max_kl: return "trl_max_kl";
    }
    return "unknown";
}

std::string_view to_string(NuKind kind) {
    switch (kind) {
        case NuKind::match_beta: return "match_beta";
        case NuKind::rho_bar: return "rho_bar";
        case NuKind::dirac_max: return "dirac_max";
    }
    return "unknown";
}

std::optional<DriftKind> parse_drift_kind(std::string_view name) {
    for (const auto kind : {DriftKind::trivial, DriftKind::kl, DriftKind::reverse_kl, DriftKind::sq_l2,
                            DriftKind::sq_tv, DriftKind::ppo_clip, DriftKind::trl_max_kl}) {
        if (name == to_string(kind)) return kind;
    }
    if (name == "reverse-kl") return DriftKind::reverse_kl;
    if (name == "sq-l2") return DriftKind::sq_l2;
    if (name == "sq-tv") return DriftKind::sq_tv;
    if (name == "ppo-clip") return DriftKind::ppo_clip;
    if (name == "trl-max-kl") return DriftKind::trl_max_kl;
    return std::nullopt;
}

std::optional<NuKind> parse_nu_kind(std::string_view name) {
    if (name == "match_beta" || name == "match-beta") return NuKind::match_beta;
    if (name == "rho_bar" || name == "rho-bar") return NuKind::rho_bar;
    if (name == "dirac_max" || name == "dirac-max") return NuKind::dirac_max;
    return std::nullopt;
}

DriftSpec DriftSpec::make(DriftKind kind, double coeff) {
    DriftSpec spec;
    spec.kind = kind;
    spec.coeff = coeff;
    if (kind == DriftKind::ppo_clip) spec.clip_epsilon = 0.2;
    if (kind == DriftKind::trl_max_kl) spec.nu = NuKind::dirac_max;
    return spec;
}

void DriftSpec::validate() const {
    if (!(coeff >= 0.0) || !std::isfinite(coeff)) {
        throw std::invalid_argument("drift coeff must be a finite value >= 0");
    }
    if (kind == DriftKind::ppo_clip) {
        if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
            throw std::invalid_argument("ppo_clip drift needs clip_epsilon in (0, 1)");
        }
    } else if (clip_epsilon != 0.0) {
        throw std::invalid_argument("clip_epsilon is only meaningful for ppo_clip");
    }
    if ((kind == DriftKind::trl_max_kl) != (nu == NuKind::dirac_max)) {
        throw std::invalid_argument("dirac_max weighting is required by, and only valid for, trl_max_kl");
    }
}

bool DriftSpec::is_positive() const {
    switch (kind) {
        case DriftKind::kl:
        case DriftKind::reverse_kl:
        case DriftKind::sq_l2:
        case DriftKind::sq_tv:
        case DriftKind::trl_max_kl: return coeff > 0.0;
        case DriftKind::trivial:
        case DriftKind::ppo_clip: return false;
    }
    return false;
}

LocalDrift::LocalDrift(const DriftSpec& spec, Eigen::VectorXd old_row, Eigen::VectorXd adv_row, double scale)
    : spec_(spec), old_(std::move(old_row)), adv_(std::move(adv_row)), scale_(scale) {}

namespace {

double clip(double r, double eps) { return std::clamp(r, 1.0 - eps, 1.0 + eps); }

Eigen::VectorXd sign_of(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

double LocalDrift::value(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    switch (spec_.kind) {
        case DriftKind::trivial: return 0.0;
        case DriftKind::kl:
        case DriftKind::trl_max_kl: return scale_ * divergence(DivergenceKind::kl, old_, q);
        case DriftKind::reverse_kl: return scale_ * divergence(DivergenceKind::reverse_kl, old_, q);
        case DriftKind::sq_l2: return scale_ * divergence(DivergenceKind::sq_l2, old_, q);
        case DriftKind::sq_tv: return scale_ * divergence(DivergenceKind::sq_tv, old_, q);
        case DriftKind::ppo_clip: {
            double total = 0.0;
            for (Eigen::Index a = 0; a < q.size(); ++a) {
                const double p = std::max(old_(a), kProbabilityFloor);
                const double r = q(a) / p;
                const double excess = (r - clip(r, spec_.clip_epsilon)) * adv_(a);
                total += old_(a) * std::max(excess, 0.0);
            }
            return scale_ * total;
        }
    }
    return 0.0;
}

Eigen::VectorXd LocalDrift::gradient(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    const Eigen::Index n = q.size();
    const Eigen::VectorXd p = old_.cwiseMax(kProbabilityFloor);
    switch (spec_.kind) {
        case DriftKind::trivial: return Eigen::VectorXd::Zero(n);
        case DriftKind::kl:
        case DriftKind::trl_max_kl: return -scale_ * p.cwiseQuotient(q);
        case DriftKind::reverse_kl: {
            const Eigen::VectorXd qc = q.cwiseMax(kProbabilityFloor);
            return scale_ * ((qc.array() / p.array()).log() + 1.0).matrix();
        }
        case DriftKind::sq_l2: return 2.0 * scale_ * (q - old_);
        case DriftKind::sq_tv: {
            const double tv = 0.5 * (q - old_).cwiseAbs().sum();
            return scale_ * tv * sign_of(q - old_);
        }
        case DriftKind::ppo_clip: {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
            for (Eigen::Index a = 0; a < n; ++a) {
                const double r = q(a) / p(a);
                const double excess = (r - clip(r, spec_.clip_epsilon)) * adv_(a);
                if (excess > 0.0) g(a) = scale_ * old_(a) * adv_(a) / p(a);
            }
            return g;
        }
    }
    return Eigen::VectorXd::Zero(n);
}

Eigen::MatrixXd LocalDrift::hessian(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    const Eigen::Index n = q.size();
    const Eigen::VectorXd p = old_.cwiseMax(kProbabilityFloor);
    switch (spec_.kind) {
        case DriftKind::kl:
        case DriftKind::trl_max_kl:
            return (scale_ * p.array() / q.array().square()).matrix().asDiagonal();
        case DriftKind::reverse_kl:
            return (scale_ / q.cwiseMax(kProbabilityFloor).array()).matrix().asDiagonal();
        case DriftKind::sq_l2: return 2.0 * scale_ * Eigen::MatrixXd::Identity(n, n);
        case DriftKind::sq_tv: {
            const Eigen::VectorXd sg = sign_of(q - old_);
            return 0.5 * scale_ * sg * sg.transpose();
        }
        case DriftKind::trivial:
        case DriftKind::ppo_clip: return Eigen::MatrixXd::Zero(n, n);
    }
    return Eigen::MatrixXd::Zero(n, n);
}

double drift_scale(const DriftSpec& spec, const TabularMdp& mdp, const Eigen::Ref<const Eigen::MatrixXd>& adv) {
    if (spec.kind != DriftKind::trl_max_kl) return spec.coeff;
    const double one_minus = 1.0 - mdp.gamma;
    const double c = 4.0 * mdp.gamma * adv.cwiseAbs().maxCoeff() / (one_minus * one_minus);
    return spec.coeff * one_minus * c;
}

double drift_at_state(const DriftSpec& spec, const TabularMdp& mdp, const Eigen::Ref<const Eigen::MatrixXd>& adv,
                      const TabularPolicy& pi, const TabularPolicy& pibar, int s) {
    check_policy_shape(mdp, pi);
    check_policy_shape(mdp, pibar);
    if (s < 0 || s >= mdp.num_states) {
        throw std::invalid_argument("drift_at_state: state out of range");
    }
    const LocalDrift local(spec, pi.row(s), adv.row(s).transpose(), drift_scale(spec, mdp, adv));
    return local.value(pibar.row(s));
}

Eigen::VectorXd drift_per_state(const DriftSpec& spec, const TabularMdp& mdp,
                                const Eigen::Ref<const Eigen::MatrixXd>& adv, const TabularPolicy& pi,
                                const TabularPolicy& pibar) {
    check_policy_shape(mdp, pi);
    check_policy_shape(mdp, pibar);
    const double scale = drift_scale(spec, mdp, adv);
    Eigen::VectorXd out(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        const LocalDrift local(spec, pi.row(s), adv.row(s).transpose(), scale);
        out(s) = local.value(pibar.row(s));
    }
    return out;
}

Eigen::VectorXd resolve_nu(NuKind nu, const Eigen::Ref<const Eigen::VectorXd>& beta,
                           const Eigen::Ref<const Eigen::VectorXd>& rho_bar_old,
                           const Eigen::Ref<const Eigen::VectorXd>& per_state) {
    switch (nu) {
        case NuKind::match_beta: return beta;
        case NuKind::rho_bar: return rho_bar_old;
        case NuKind::dirac_max: {
            Eigen::Index best = 0;
            for (Eigen::Index s = 1; s < per_state.size(); ++s) {
                if (per_state(s) > per_state(best)) best = s;
            }
            Eigen::VectorXd out = Eigen::VectorXd::Zero(per_state.size());
            out(best) = 1.0;
            return out;
        }
    }
    return beta;
}

void check_sampling_distribution(const TabularMdp& mdp, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (beta.size() != mdp.num_states) {
        throw std::invalid_argument("sampling distribution has the wrong length");
    }
    if ((beta.array() <= 0.0).any()) {
        throw std::invalid_argument("sampling distribution must be strictly positive on every state");
    }
    if (std::abs(beta.sum() - 1.0) > 1e-10) {
        throw std::invalid_argument("sampling distribution must sum to 1");
    }
}

DriftReport expected_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                           const ValueTables& old_values, const TabularPolicy& pibar,
                           const Eigen::Ref<const Eigen::VectorXd>& beta) {
    spec.validate();
    check_sampling_distribution(mdp, beta);
    DriftReport report;
    report.per_state = drift_per_state(spec, mdp, old_values.adv, pi, pibar);
    const Eigen::VectorXd rho_bar =
        spec.nu == NuKind::rho_bar ? discounted_visitation(mdp, pi, true) : Eigen::VectorXd(beta);
    report.nu_weights = resolve_nu(spec.nu, beta, rho_bar, report.per_state);
    report.expected = report.nu_weights.dot(report.per_state);
    return report;
}

DriftReport expected_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi,
                           const TabularPolicy& pibar, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    return expected_drift(spec, mdp, pi, evaluate_policy(mdp, pi), pibar, beta);
}

namespace {

Eigen::VectorXd random_distribution(std::mt19937_64& rng, int n) {
    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = expo(rng);
    return out / out.sum();
}

Eigen::VectorXd random_tangent(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = unit(rng);
    v.array() -= v.mean();
    const double l1 = v.cwiseAbs().sum();
    return l1 > 0.0 ? Eigen::VectorXd(v / l1) : Eigen::VectorXd::Zero(n);
}

}  // namespace

DriftValidation validate_drift(const DriftSpec& spec, const TabularMdp& mdp, const TabularPolicy& pi, int trials,
                               double h, std::uint64_t seed) {
    spec.validate();
    check_policy_shape(mdp, pi);
    if (!is_interior(pi)) {
        throw std::invalid_argument("validate_drift needs a strictly interior policy");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick_state(0, mdp.num_states - 1);
    const ValueTables values = evaluate_policy(mdp, pi);
    const double scale = drift_scale(spec, mdp, values.adv);

    DriftValidation out;
    for (int s = 0; s < mdp.num_states; ++s) {
        const LocalDrift local(spec, pi.row(s), values.adv.row(s).transpose(), scale);
        out.identity_drift = std::max(out.identity_drift, std::abs(local.value(pi.row(s))));
    }

    for (int t = 0; t < trials; ++t) {
        const int s = pick_state(rng);
        const LocalDrift local(spec, pi.row(s), values.adv.row(s).transpose(), scale);
        out.min_drift = std::min(out.min_drift, local.value(random_distribution(rng, mdp.num_actions)));

        const Eigen::VectorXd v = random_tangent(rng, mdp.num_actions);
        const Eigen::VectorXd p = pi.row(s);
        const double base = local.value(p);
        const double q1 = (local.value(p + h * v) - base) / h;
        const double q2 = (local.value(p + (h / 10.0) * v) - base) / (h / 10.0);
        out.max_quotient_h = std::max(out.max_quotient_h, std::abs(q1));
        out.max_quotient_h_tenth = std::max(out.max_quotient_h_tenth, std::abs(q2));
    }
    out.nonnegative = out.min_drift >= -1e-10 && out.identity_drift <= 1e-12;
    out.zero_gradient = out.max_quotient_h <= 10.0 * h && out.max_quotient_h_tenth <= h;
    return out;
}

}  // namespace mirror
