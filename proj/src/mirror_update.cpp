#include "mirror/mirror_update.hpp"

#include "mirror/softmax_calculus.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace mirror {

std::string_view to_string(SamplingKind kind) {
    switch (kind) {
        case SamplingKind::uniform: return "uniform";
        case SamplingKind::rho_bar: return "rho_bar";
    }
    return "unknown";
}

std::optional<SamplingKind> parse_sampling_kind(std::string_view name) {
    if (name == "uniform") return SamplingKind::uniform;
    if (name == "rho_bar" || name == "rho-bar") return SamplingKind::rho_bar;
    return std::nullopt;
}

Eigen::VectorXd SamplingSpec::resolve(const TabularMdp& mdp, const TabularPolicy& pi) const {
    if (kind == SamplingKind::uniform) {
        return Eigen::VectorXd::Constant(mdp.num_states, 1.0 / mdp.num_states);
    }
    Eigen::VectorXd rho = discounted_visitation(mdp, pi, true);
    if ((rho.array() <= 0.0).any()) {
        throw std::invalid_argument("rho_bar sampling: some state is never visited under the current policy");
    }
    return rho / rho.sum();
}

void SolverConfig::validate() const {
    if (max_outer_iters <= 0 || multiplier_iters <= 0) {
        throw std::invalid_argument("solver iteration counts must be positive");
    }
    if (!(grad_tol > 0.0) || !(step_init > 0.0) || !(finite_diff_h > 0.0) || !(max_logit > 0.0)) {
        throw std::invalid_argument("solver tolerances and steps must be positive");
    }
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
        throw std::invalid_argument("backtrack_factor must lie in (0, 1)");
    }
}

Eigen::VectorXd mirror_values(const TabularMdp& mdp, const TabularPolicy& pi, const ValueTables& old_values,
                              const TabularPolicy& pibar, const DriftSpec& spec,
                              const Eigen::Ref<const Eigen::VectorXd>& beta) {
    const DriftReport report = expected_drift(spec, mdp, pi, old_values, pibar, beta);
    Eigen::VectorXd out(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        const double expect = old_values.q.row(s).dot(pibar.probs().row(s));
        const double penalty = report.per_state(s) == 0.0 ? 0.0 : report.nu_weights(s) / beta(s) * report.per_state(s);
        out(s) = expect - penalty;
    }
    return out;
}

double mirror_value(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                    const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta, int s) {
    if (s < 0 || s >= mdp.num_states) {
        throw std::invalid_argument("mirror_value: state out of range");
    }
    return mirror_values(mdp, pi, evaluate_policy(mdp, pi), pibar, spec, beta)(s);
}

double mirror_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                        const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta) {
    return beta.dot(mirror_values(mdp, pi, evaluate_policy(mdp, pi), pibar, spec, beta));
}

Eigen::MatrixXd mirror_objective_gradient(const TabularMdp& mdp, const TabularPolicy& pi,
                                          const SoftmaxPolicy& pibar, const DriftSpec& spec,
                                          const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (!spec.is_separable()) {
        throw std::invalid_argument("mirror_objective_gradient: nu must not depend on the candidate policy");
    }
    spec.validate();
    check_policy_shape(mdp, pi);
    check_sampling_distribution(mdp, beta);
    const ValueTables old = evaluate_policy(mdp, pi);
    const double scale = drift_scale(spec, mdp, old.adv);
    const Eigen::VectorXd nu =
        spec.nu == NuKind::rho_bar ? discounted_visitation(mdp, pi, true) : Eigen::VectorXd(beta);
    const int m = mdp.num_actions - 1;

    Eigen::MatrixXd grad(mdp.num_states, m);
    for (int s = 0; s < mdp.num_states; ++s) {
        const Eigen::VectorXd q = softmax_row(pibar.logits().row(s).transpose());
        const LocalDrift local(spec, pi.row(s), old.adv.row(s).transpose(), scale);
        const Eigen::VectorXd gq = beta(s) * old.q.row(s).transpose() - nu(s) * local.gradient(q);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        add_pullback(q, gq, Eigen::MatrixXd::Zero(m + 1, m + 1), g, h);
        grad.row(s) = g.transpose();
    }
    return grad;
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Everything about the old policy the solver needs, computed once.
struct Frame {
    const TabularMdp& mdp;
    TabularPolicy old_pi;
    Mat old_logits;
    ValueTables old;
    Vec beta;
    DriftSpec drift;
    NeighbourhoodSpec neigh;
    SolverConfig cfg;
    std::vector<int> free_states;
    std::vector<LocalDrift> penalty;     // objective drift per state
    Vec penalty_weight;                  // nu(s); only meaningful for separable nu
    std::vector<LocalDrift> constraint;  // q-space constraint term per state
    Vec constraint_weight;
    bool has_constraint = false;
    bool logit_constraint = false;       // param_l2_ball
    double budget = 0.0;

    Frame(const TabularMdp& m, const SoftmaxPolicy& pi, const DriftSpec& d, const NeighbourhoodSpec& n,
          const Eigen::Ref<const Eigen::VectorXd>& b, const SolverConfig& c)
        : mdp(m), old_pi(pi.to_simplex()), old_logits(pi.logits()), old(evaluate_policy(m, old_pi)), beta(b),
          drift(d), neigh(n), cfg(c), free_states(m.decision_states()) {
        const double scale = drift_scale(drift, mdp, old.adv);
        const bool need_rho = drift.nu == NuKind::rho_bar || neigh.kind == NeighbourhoodKind::avg_kl_ball;
        const Vec rho = need_rho ? discounted_visitation(mdp, old_pi, true) : Vec();
        penalty_weight = drift.nu == NuKind::rho_bar ? rho : beta;

        DriftSpec con_spec;
        double con_scale = 1.0;
        switch (neigh.kind) {
            case NeighbourhoodKind::trivial: break;
            case NeighbourhoodKind::avg_kl_ball:
                has_constraint = true;
                con_spec = DriftSpec::make(DriftKind::kl);
                constraint_weight = rho;
                budget = neigh.radius;
                break;
            case NeighbourhoodKind::drift_ball:
                has_constraint = neigh.drift_ref.kind != DriftKind::trivial;
                con_spec = neigh.drift_ref;
                con_scale = drift_scale(con_spec, mdp, old.adv);
                constraint_weight = beta;
                budget = neigh.radius;
                break;
            case NeighbourhoodKind::param_l2_ball:
                has_constraint = true;
                logit_constraint = true;
                budget = neigh.radius * neigh.radius;
                break;
        }
        if (constraint_weight.size() == 0) constraint_weight = Vec::Zero(mdp.num_states);

        for (int s = 0; s < mdp.num_states; ++s) {
            penalty.emplace_back(drift, old_pi.row(s), old.adv.row(s).transpose(), scale);
            constraint.emplace_back(con_spec, old_pi.row(s), old.adv.row(s).transpose(), con_scale);
        }
    }

    double state_constraint(int s, const Vec& theta) const {
        if (logit_constraint) return (theta - old_logits.row(s).transpose()).squaredNorm();
        return constraint_weight(s) * constraint[static_cast<std::size_t>(s)].value(softmax_row(theta));
    }

    double constraint_sum(const Mat& logits) const {
        if (!has_constraint) return 0.0;
        double total = 0.0;
        for (const int s : free_states) total += state_constraint(s, logits.row(s).transpose());
        return total;
    }

    /// Slightly inside the radius so that round-off in the public margin
    /// computation cannot push an accepted iterate outside.
    double target() const { return budget * (1.0 - 1e-9); }
};

/// Lagrangian of one state: beta Q.q - nu D(q) - lambda c(q or theta).
struct LocalProblem {
    const Frame& frame;
    int s;
    double lambda;

    double value(const Vec& theta) const {
        const std::size_t i = static_cast<std::size_t>(s);
        const Vec q = softmax_row(theta);
        double v = frame.beta(s) * frame.old.q.row(s).dot(q);
        if (frame.drift.kind != DriftKind::trivial) v -= frame.penalty_weight(s) * frame.penalty[i].value(q);
        if (lambda > 0.0) v -= lambda * frame.state_constraint(s, theta);
        return v;
    }

    void derivatives(const Vec& theta, Vec& g, Mat& h) const {
        const std::size_t i = static_cast<std::size_t>(s);
        const Vec q = softmax_row(theta);
        Vec gq = frame.beta(s) * frame.old.q.row(s).transpose();
        Mat hq = Mat::Zero(q.size(), q.size());
        if (frame.drift.kind != DriftKind::trivial) {
            gq -= frame.penalty_weight(s) * frame.penalty[i].gradient(q);
            hq -= frame.penalty_weight(s) * frame.penalty[i].hessian(q);
        }
        if (lambda > 0.0 && !frame.logit_constraint) {
            const double w = lambda * frame.constraint_weight(s);
            gq -= w * frame.constraint[i].gradient(q);
            hq -= w * frame.constraint[i].hessian(q);
        }
        g.setZero();
        h.setZero();
        add_pullback(q, gq, hq, g, h);
        if (lambda > 0.0 && frame.logit_constraint) {
            g -= 2.0 * lambda * (theta - frame.old_logits.row(s).transpose());
            h.diagonal().array() -= 2.0 * lambda;
        }
    }
};

Vec clamp_box(const Vec& x, double bound) { return x.cwiseMax(-bound).cwiseMin(bound); }

/// Zeroes the components that push out of the box at an active bound.
Vec project_at_bounds(const Vec& theta, Vec v, double bound) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if ((theta(i) >= bound && v(i) > 0.0) || (theta(i) <= -bound && v(i) < 0.0)) v(i) = 0.0;
    }
    return v;
}

/// Saddle-free Newton ascent with Armijo backtracking and step expansion.
/// Returns the number of iterations used.
int maximize_local(const LocalProblem& problem, Vec& theta, const SolverConfig& cfg) {
    const Eigen::Index m = theta.size();
    const double bound = cfg.max_logit;
    const double max_component = 2.0 * bound;
    Vec g(m);
    Mat h(m, m);
    double f = problem.value(theta);
    int iters = 0;
    for (; iters < cfg.max_outer_iters; ++iters) {
        problem.derivatives(theta, g, h);
        const Vec pg = project_at_bounds(theta, g, bound);
        if (pg.cwiseAbs().maxCoeff() <= cfg.grad_tol) break;

        Eigen::SelfAdjointEigenSolver<Mat> eig(h);
        Vec d = Vec::Zero(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const Vec v = eig.eigenvectors().col(k);
            const double mu = std::max(std::abs(eig.eigenvalues()(k)), std::numeric_limits<double>::min());
            const double c = std::clamp(v.dot(pg) / mu, -max_component, max_component);
            d += c * v;
        }
        d = project_at_bounds(theta, d, bound);
        if (!(pg.dot(d) > 0.0)) d = pg;

        double t = 1.0;
        Vec trial;
        double ft = f;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            trial = clamp_box(theta + t * d, bound);
            ft = problem.value(trial);
            if (ft > f && ft >= f + 1e-4 * g.dot(trial - theta)) {
                accepted = true;
                break;
            }
            t *= cfg.backtrack_factor;
        }
        if (!accepted) break;
        if (t == 1.0) {
            for (int k = 0; k < 20; ++k) {
                t *= 2.0;
                const Vec wider = clamp_box(theta + t * d, bound);
                const double fw = problem.value(wider);
                if (!(fw > ft)) break;
                trial = wider;
                ft = fw;
            }
        }
        const double gain = ft - f;
        theta = trial;
        f = ft;
        if (gain <= 1e-15 * (1.0 + std::abs(f))) {
            ++iters;
            break;
        }
    }
    return iters;
}

struct SolveOutcome {
    Mat logits;
    int iters = 0;
    double multiplier = 0.0;
};

/// Separable nu: bisection on the multiplier of the single ball constraint.
SolveOutcome solve_separable(const Frame& frame) {
    SolveOutcome out;
    auto solve_at = [&](double lambda) {
        Mat logits = frame.old_logits;
        for (const int s : frame.free_states) {
            // A saturated old row has vanishing logit gradients towards the
            // other actions, so also start from the centre and keep the better.
            const LocalProblem problem{frame, s, lambda};
            Vec theta = frame.old_logits.row(s).transpose();
            out.iters += maximize_local(problem, theta, frame.cfg);
            Vec centre = Vec::Zero(theta.size());
            out.iters += maximize_local(problem, centre, frame.cfg);
            if (problem.value(centre) > problem.value(theta)) theta = centre;
            logits.row(s) = theta.transpose();
        }
        return logits;
    };

    Mat best = solve_at(0.0);
    if (!frame.has_constraint || frame.constraint_sum(best) <= frame.target()) {
        out.logits = std::move(best);
        return out;
    }

    const double target = frame.target();
    double lo = 0.0;
    double hi = 1.0;
    Mat hi_logits = solve_at(hi);
    double hi_dist = frame.constraint_sum(hi_logits);
    for (int k = 0; hi_dist > target; ++k) {
        if (k > 200) throw std::runtime_error("solve_update: could not bracket the constraint multiplier");
        lo = hi;
        hi *= 8.0;
        hi_logits = solve_at(hi);
        hi_dist = frame.constraint_sum(hi_logits);
    }
    for (int k = 0; k < frame.cfg.multiplier_iters; ++k) {
        if (hi_dist >= target * (1.0 - 1e-3)) break;
        if (lo > 0.0 && hi <= lo * (1.0 + 1e-9)) break;
        const double mid = lo > 0.0 ? std::sqrt(lo * hi) : hi / 8.0;
        Mat mid_logits = solve_at(mid);
        const double mid_dist = frame.constraint_sum(mid_logits);
        if (mid_dist <= target) {
            hi = mid;
            hi_logits = std::move(mid_logits);
            hi_dist = mid_dist;
        } else {
            lo = mid;
        }
    }
    out.logits = std::move(hi_logits);
    out.multiplier = hi;
    return out;
}

/// Non-separable nu (dirac_max): feasible-iterates projected gradient ascent
/// on the full objective sum_s beta Q.q - max_s D(s).
SolveOutcome solve_general(const Frame& frame) {
    const SolverConfig& cfg = frame.cfg;
    const int num_states = frame.mdp.num_states;
    const int m = frame.mdp.num_actions - 1;
    const double bound = cfg.max_logit;

    auto state_drift = [&](int s, const Vec& theta) {
        return frame.penalty[static_cast<std::size_t>(s)].value(softmax_row(theta));
    };
    auto objective = [&](const Mat& logits) {
        double linear = 0.0;
        double worst = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < num_states; ++s) {
            const Vec theta = logits.row(s).transpose();
            linear += frame.beta(s) * frame.old.q.row(s).dot(softmax_row(theta));
            worst = std::max(worst, state_drift(s, theta));
        }
        return linear - worst;
    };
    auto feasible = [&](const Mat& logits) {
        return !frame.has_constraint || frame.constraint_sum(logits) <= frame.target();
    };

    SolveOutcome out;
    Mat logits = frame.old_logits;
    double f = objective(logits);
    double step = cfg.step_init;
    Mat grad(num_states, m);
    Vec drifts(num_states);
    for (; out.iters < cfg.max_outer_iters; ++out.iters) {
        for (int s = 0; s < num_states; ++s) drifts(s) = state_drift(s, logits.row(s).transpose());
        grad.setZero();
        for (const int s : frame.free_states) {
            const Vec theta = logits.row(s).transpose();
            Vec g = Vec::Zero(m);
            Mat unused = Mat::Zero(m, m);
            const Vec q = softmax_row(theta);
            add_pullback(q, frame.beta(s) * frame.old.q.row(s).transpose(), Mat::Zero(m + 1, m + 1), g, unused);
            for (int i = 0; i < m; ++i) {
                Vec up = theta;
                Vec down = theta;
                up(i) += cfg.finite_diff_h;
                down(i) -= cfg.finite_diff_h;
                Vec others = drifts;
                others(s) = state_drift(s, up);
                const double max_up = others.maxCoeff();
                others(s) = state_drift(s, down);
                const double max_down = others.maxCoeff();
                g(i) -= (max_up - max_down) / (2.0 * cfg.finite_diff_h);
            }
            grad.row(s) = project_at_bounds(theta, g, bound).transpose();
        }
        if (grad.cwiseAbs().maxCoeff() <= cfg.grad_tol) break;

        bool accepted = false;
        Mat trial;
        double ft = f;
        for (int k = 0; k < 60; ++k) {
            trial = (logits + step * grad).cwiseMax(-bound).cwiseMin(bound);
            ft = objective(trial);
            const double predicted = (grad.array() * (trial - logits).array()).sum();
            if (ft > f && ft >= f + 1e-4 * predicted && feasible(trial)) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }
        if (!accepted) break;
        logits = std::move(trial);
        f = ft;
        step /= cfg.backtrack_factor;
    }
    out.logits = std::move(logits);
    return out;
}

}  // namespace

UpdateResult solve_update(const TabularMdp& mdp, const SoftmaxPolicy& pi, const DriftSpec& drift,
                          const NeighbourhoodSpec& neigh, const Eigen::Ref<const Eigen::VectorXd>& beta,
                          const SolverConfig& cfg) {
    drift.validate();
    neigh.validate();
    cfg.validate();
    if (pi.num_states() != mdp.num_states || pi.num_actions() != mdp.num_actions) {
        throw std::invalid_argument("solve_update: policy shape does not match the MDP");
    }
    check_sampling_distribution(mdp, beta);
    if (pi.logits().cwiseAbs().maxCoeff() > cfg.max_logit) {
        throw std::invalid_argument("solve_update: logits exceed SolverConfig::max_logit");
    }

    const Frame frame(mdp, pi, drift, neigh, beta, cfg);
    SolveOutcome outcome = drift.is_separable() ? solve_separable(frame) : solve_general(frame);
    Mat logits = std::move(outcome.logits);
    for (int s = 0; s < mdp.num_states; ++s) {
        if (mdp.is_terminal(s)) logits.row(s) = frame.old_logits.row(s);
    }

    const Vec old_mirror = mirror_values(mdp, frame.old_pi, frame.old, frame.old_pi, drift, beta);
    UpdateResult result{SoftmaxPolicy(logits), frame.old_pi, 0.0, Vec(), DriftReport{}, {}};
    // Reverting one state can move the dirac_max argmax, so repeat until stable.
    for (int round = 0;; ++round) {
        if (round > mdp.num_states + 1) throw std::logic_error("solve_update: safeguard did not settle");
        result.new_policy = SoftmaxPolicy(logits).to_simplex();
        result.per_state_mirror_gain =
            mirror_values(mdp, frame.old_pi, frame.old, result.new_policy, drift, beta) - old_mirror;
        bool reverted = false;
        for (int s = 0; s < mdp.num_states; ++s) {
            if (result.per_state_mirror_gain(s) < -1e-12) {
                logits.row(s) = frame.old_logits.row(s);
                result.safeguarded_states.push_back(s);
                reverted = true;
            }
        }
        if (!reverted) break;
    }
    std::sort(result.safeguarded_states.begin(), result.safeguarded_states.end());
    result.safeguarded_states.erase(
        std::unique(result.safeguarded_states.begin(), result.safeguarded_states.end()),
        result.safeguarded_states.end());

    result.objective_gain = beta.dot(result.per_state_mirror_gain);
    result.solver_iters = outcome.iters;
    result.multiplier = outcome.multiplier;

    // At the old policy every drift has zero gradient, so the objective
    // gradient in logit s,i reduces to beta(s) pi(i|s) A(s,i).
    double stationarity = 0.0;
    for (const int s : frame.free_states) {
        Vec g = Vec::Zero(mdp.num_actions - 1);
        Mat unused = Mat::Zero(mdp.num_actions - 1, mdp.num_actions - 1);
        add_pullback(frame.old_pi.row(s), beta(s) * frame.old.q.row(s).transpose(),
                     Mat::Zero(mdp.num_actions, mdp.num_actions), g, unused);
        const Vec theta = frame.old_logits.row(s).transpose();
        stationarity = std::max(stationarity, project_at_bounds(theta, g, cfg.max_logit).cwiseAbs().maxCoeff());
    }
    result.stationary = stationarity <= cfg.grad_tol;

    if (!(result.objective_gain > 0.0)) {
        logits = frame.old_logits;
        result.new_policy = frame.old_pi;
        result.per_state_mirror_gain = Vec::Zero(mdp.num_states);
        result.objective_gain = 0.0;
        result.stalled = true;
    }
    result.new_logits = SoftmaxPolicy(logits);
    result.drift_report = expected_drift(drift, mdp, frame.old_pi, frame.old, result.new_policy, beta);
    return result;
}

// ---------------------------------------------------------------------------

std::vector<StateAction> draw_batch(const TabularMdp& mdp, const TabularPolicy& pi_old,
                                    const Eigen::Ref<const Eigen::VectorXd>& beta, int n, std::uint64_t seed) {
    check_policy_shape(mdp, pi_old);
    check_sampling_distribution(mdp, beta);
    if (n <= 0) throw std::invalid_argument("draw_batch: batch size must be positive");
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> states(beta.data(), beta.data() + beta.size());
    std::vector<std::discrete_distribution<int>> actions;
    for (int s = 0; s < mdp.num_states; ++s) {
        const Vec row = pi_old.row(s);
        actions.emplace_back(row.data(), row.data() + row.size());
    }
    std::vector<StateAction> batch(static_cast<std::size_t>(n));
    for (auto& sample : batch) {
        sample.state = states(rng);
        sample.action = actions[static_cast<std::size_t>(sample.state)](rng);
    }
    return batch;
}

namespace {

/// Per-(s, a) summand of the batch estimator.
struct EstimatorTerms {
    Mat value;  // num_states x num_actions
};

EstimatorTerms estimator_terms(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                               const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta,
                               EstimatorForm form) {
    check_policy_shape(mdp, pi);
    check_policy_shape(mdp, pibar);
    const ValueTables old = evaluate_policy(mdp, pi);
    const DriftReport report = expected_drift(spec, mdp, pi, old, pibar, beta);
    const Mat& base = form == EstimatorForm::q_value ? old.q : old.adv;
    EstimatorTerms terms{Mat::Zero(mdp.num_states, mdp.num_actions)};
    for (int s = 0; s < mdp.num_states; ++s) {
        const double penalty = report.per_state(s) == 0.0 ? 0.0 : report.nu_weights(s) / beta(s) * report.per_state(s);
        for (int a = 0; a < mdp.num_actions; ++a) {
            if (pi(s, a) <= 0.0) continue;
            terms.value(s, a) = pibar(s, a) / pi(s, a) * base(s, a) - penalty;
        }
    }
    return terms;
}

}  // namespace

Estimate monte_carlo_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                               const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta,
                               const std::vector<StateAction>& batch, EstimatorForm form) {
    if (batch.empty()) throw std::invalid_argument("monte_carlo_objective: empty batch");
    const EstimatorTerms terms = estimator_terms(mdp, pi, pibar, spec, beta, form);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& sample : batch) {
        if (sample.state < 0 || sample.state >= mdp.num_states || sample.action < 0 ||
            sample.action >= mdp.num_actions) {
            throw std::invalid_argument("monte_carlo_objective: sample out of range");
        }
        if (pi(sample.state, sample.action) <= 0.0) {
            throw std::invalid_argument("monte_carlo_objective: sample has zero probability under pi_old");
        }
        const double x = terms.value(sample.state, sample.action);
        sum += x;
        sum_sq += x * x;
    }
    const double n = static_cast<double>(batch.size());
    Estimate est;
    est.count = batch.size();
    est.mean = sum / n;
    const double var = batch.size() > 1 ? std::max(sum_sq - n * est.mean * est.mean, 0.0) / (n - 1.0) : 0.0;
    est.std_error = std::sqrt(var / n);
    return est;
}

double enumerated_objective(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& pibar,
                            const DriftSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& beta,
                            EstimatorForm form) {
    const EstimatorTerms terms = estimator_terms(mdp, pi, pibar, spec, beta, form);
    double total = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) total += beta(s) * pi(s, a) * terms.value(s, a);
    }
    return total;
}

Estimate off_policy_estimate(const TabularPolicy& pibar, const std::vector<BufferEntry>& buffer) {
    if (buffer.empty()) throw std::invalid_argument("off_policy_estimate: empty buffer");
    double wsum = 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const BufferEntry& e = buffer[i];
        if (e.state < 0 || e.state >= pibar.num_states() || e.action < 0 || e.action >= pibar.num_actions()) {
            throw std::invalid_argument("off_policy_estimate: entry " + std::to_string(i) + " is out of range");
        }
        if (!(e.hist_prob > 0.0) || e.hist_prob > 1.0) {
            throw std::invalid_argument("off_policy_estimate: corrupt buffer, entry " + std::to_string(i) +
                                        " stores historical probability " + std::to_string(e.hist_prob));
        }
        if (!(e.weight >= 0.0)) {
            throw std::invalid_argument("off_policy_estimate: negative entry weight");
        }
        const double x = pibar(e.state, e.action) / e.hist_prob * e.q_old;
        wsum += e.weight;
        sum += e.weight * x;
        sum_sq += e.weight * x * x;
    }
    if (!(wsum > 0.0)) throw std::invalid_argument("off_policy_estimate: all entry weights are zero");
    Estimate est;
    est.count = buffer.size();
    est.mean = sum / wsum;
    const double n = static_cast<double>(buffer.size());
    const double var = std::max(sum_sq / wsum - est.mean * est.mean, 0.0);
    est.std_error = n > 1.0 ? std::sqrt(var * n / (n - 1.0) / n) : 0.0;
    return est;
}

}  // namespace mirror
