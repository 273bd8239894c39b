#include "mirror/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mirror {

namespace {

void check_distribution_rows(const Eigen::MatrixXd& probs) {
    if (probs.rows() == 0 || probs.cols() == 0) {
        throw std::invalid_argument("policy table must be non-empty");
    }
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        double sum = 0.0;
        for (Eigen::Index a = 0; a < probs.cols(); ++a) {
            const double p = probs(s, a);
            if (!std::isfinite(p) || p < 0.0) {
                throw std::invalid_argument("policy row " + std::to_string(s) +
                                            " has a negative or non-finite entry");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("policy row " + std::to_string(s) + " sums to " +
                                        std::to_string(sum));
        }
    }
}

}  // namespace

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    check_distribution_rows(probs_);
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
    if (num_states <= 0 || num_actions <= 0) {
        throw std::invalid_argument("uniform policy needs positive dimensions");
    }
    return TabularPolicy(Eigen::MatrixXd::Constant(num_states, num_actions, 1.0 / num_actions));
}

TabularPolicy TabularPolicy::deterministic(std::span<const int> actions, int num_actions) {
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= num_actions) {
            throw std::invalid_argument("deterministic policy action out of range");
        }
        probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return TabularPolicy(std::move(probs));
}

TabularPolicy TabularPolicy::with_row(int s, const Eigen::Ref<const Eigen::VectorXd>& dist) const {
    if (dist.size() != probs_.cols()) {
        throw std::invalid_argument("with_row: dimension mismatch");
    }
    Eigen::MatrixXd copy = probs_;
    copy.row(s) = dist.transpose();
    return TabularPolicy(std::move(copy));
}

std::vector<int> TabularPolicy::argmax_actions() const {
    std::vector<int> out(static_cast<std::size_t>(num_states()));
    for (int s = 0; s < num_states(); ++s) {
        Eigen::Index best = 0;
        probs_.row(s).maxCoeff(&best);
        out[static_cast<std::size_t>(s)] = static_cast<int>(best);
    }
    return out;
}

SoftmaxPolicy::SoftmaxPolicy(Eigen::MatrixXd logits) : logits_(std::move(logits)) {
    if (logits_.rows() == 0) {
        throw std::invalid_argument("softmax policy needs at least one state");
    }
    if (!logits_.allFinite()) {
        throw std::invalid_argument("softmax logits must be finite");
    }
}

SoftmaxPolicy SoftmaxPolicy::uniform(int num_states, int num_actions) {
    if (num_states <= 0 || num_actions <= 0) {
        throw std::invalid_argument("uniform policy needs positive dimensions");
    }
    return SoftmaxPolicy(Eigen::MatrixXd::Zero(num_states, num_actions - 1));
}

SoftmaxPolicy SoftmaxPolicy::from_simplex(const TabularPolicy& pi) {
    if (!is_interior(pi)) {
        throw std::invalid_argument("from_simplex requires a strictly positive policy");
    }
    const int num_actions = pi.num_actions();
    Eigen::MatrixXd logits(pi.num_states(), num_actions - 1);
    for (int s = 0; s < pi.num_states(); ++s) {
        const double last = std::log(pi(s, num_actions - 1));
        for (int a = 0; a + 1 < num_actions; ++a) {
            logits(s, a) = std::log(pi(s, a)) - last;
        }
    }
    return SoftmaxPolicy(std::move(logits));
}

Eigen::VectorXd softmax_row(const Eigen::Ref<const Eigen::VectorXd>& free_logits) {
    const Eigen::Index n = free_logits.size() + 1;
    Eigen::VectorXd out(n);
    out.head(n - 1) = free_logits;
    out(n - 1) = 0.0;
    const double shift = out.maxCoeff();
    out = (out.array() - shift).exp();
    out /= out.sum();
    return out;
}

TabularPolicy SoftmaxPolicy::to_simplex() const {
    Eigen::MatrixXd probs(num_states(), num_actions());
    for (int s = 0; s < num_states(); ++s) {
        probs.row(s) = softmax_row(logits_.row(s).transpose()).transpose();
    }
    return TabularPolicy(std::move(probs));
}

TabularPolicy to_simplex(const SoftmaxPolicy& sp) { return sp.to_simplex(); }

std::string_view to_string(DivergenceKind kind) {
    switch (kind) {
        case DivergenceKind::kl: return "kl";
        case DivergenceKind::reverse_kl: return "reverse_kl";
        case DivergenceKind::sq_l2: return "sq_l2";
        case DivergenceKind::sq_tv: return "sq_tv";
    }
    return "unknown";
}

std::optional<DivergenceKind> parse_divergence_kind(std::string_view name) {
    if (name == "kl") return DivergenceKind::kl;
    if (name == "reverse_kl" || name == "reverse-kl") return DivergenceKind::reverse_kl;
    if (name == "sq_l2" || name == "sq-l2") return DivergenceKind::sq_l2;
    if (name == "sq_tv" || name == "sq-tv") return DivergenceKind::sq_tv;
    return std::nullopt;
}

namespace {

double kl_clamped(const Eigen::Ref<const Eigen::VectorXd>& p, const Eigen::Ref<const Eigen::VectorXd>& q) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        const double pa = std::max(p(a), kProbabilityFloor);
        const double qa = std::max(q(a), kProbabilityFloor);
        total += pa * std::log(pa / qa);
    }
    // Clamping can leave a tiny negative residue when p == q up to rounding.
    return std::max(total, 0.0);
}

}  // namespace

double divergence(DivergenceKind kind, const Eigen::Ref<const Eigen::VectorXd>& p,
                  const Eigen::Ref<const Eigen::VectorXd>& q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("divergence: dimension mismatch");
    }
    switch (kind) {
        case DivergenceKind::kl: return kl_clamped(p, q);
        case DivergenceKind::reverse_kl: return kl_clamped(q, p);
        case DivergenceKind::sq_l2: return (p - q).squaredNorm();
        case DivergenceKind::sq_tv: {
            const double tv = 0.5 * (p - q).cwiseAbs().sum();
            return tv * tv;
        }
    }
    throw std::invalid_argument("divergence: unknown kind");
}

double policy_metric(const TabularPolicy& pi1, const TabularPolicy& pi2, DivergenceKind kind) {
    if (pi1.num_states() != pi2.num_states() || pi1.num_actions() != pi2.num_actions()) {
        throw std::invalid_argument("policy_metric: shape mismatch");
    }
    double worst = 0.0;
    for (int s = 0; s < pi1.num_states(); ++s) {
        worst = std::max(worst, divergence(kind, pi1.row(s), pi2.row(s)));
    }
    return worst;
}

bool is_interior(const TabularPolicy& pi) { return (pi.probs().array() > 0.0).all(); }

}  // namespace mirror
