#include "doctest.h"

#include "mirror/environments.hpp"
#include "mirror/mirror_update.hpp"

#include <cmath>
#include <random>

using namespace mirror;

namespace {

TabularPolicy random_interior(std::mt19937_64& rng, int states, int actions) {
    std::exponential_distribution<double> expo(1.0);
    Eigen::MatrixXd probs(states, actions);
    for (Eigen::Index i = 0; i < probs.size(); ++i) probs.data()[i] = 0.05 + expo(rng);
    for (int s = 0; s < states; ++s) probs.row(s) /= probs.row(s).sum();
    return TabularPolicy(probs);
}

Eigen::VectorXd random_beta(std::mt19937_64& rng, int n) {
    return random_interior(rng, 1, n).row(0);
}

}  // namespace

TEST_CASE("enumerated estimator reproduces the exact objective") {
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularMdp mdp = build_random_mdp(4, 3, 0.8, seed);
        const TabularPolicy pi = random_interior(rng, 4, 3);
        const TabularPolicy pibar = random_interior(rng, 4, 3);
        const Eigen::VectorXd beta = random_beta(rng, 4);
        const Eigen::VectorXd v = evaluate_policy(mdp, pi).v;
        for (const auto kind : {DriftKind::trivial, DriftKind::kl, DriftKind::sq_tv, DriftKind::ppo_clip,
                                DriftKind::trl_max_kl}) {
            const DriftSpec spec = DriftSpec::make(kind);
            const double exact = mirror_objective(mdp, pi, pibar, spec, beta);
            CHECK(std::abs(enumerated_objective(mdp, pi, pibar, spec, beta) - exact) < 1e-12);
            CHECK(std::abs(enumerated_objective(mdp, pi, pibar, spec, beta, EstimatorForm::advantage) -
                           (exact - beta.dot(v))) < 1e-12);
        }
    }
}

TEST_CASE("sampled estimator lands within three standard errors") {
    std::mt19937_64 rng(2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularMdp mdp = build_random_mdp(5, 3, 0.9, 20 + seed);
        const TabularPolicy pi = random_interior(rng, 5, 3);
        const TabularPolicy pibar = random_interior(rng, 5, 3);
        const Eigen::VectorXd beta = random_beta(rng, 5);
        const DriftSpec spec = DriftSpec::make(DriftKind::kl, 0.5);
        const auto batch = draw_batch(mdp, pi, beta, 100000, seed);
        for (const auto form : {EstimatorForm::q_value, EstimatorForm::advantage}) {
            const Estimate est = monte_carlo_objective(mdp, pi, pibar, spec, beta, batch, form);
            const double exact = enumerated_objective(mdp, pi, pibar, spec, beta, form);
            CHECK(est.count == 100000);
            CHECK(est.std_error > 0.0);
            CHECK(std::abs(est.mean - exact) <= 3.0 * est.std_error);
        }
    }
}

TEST_CASE("batches follow beta and the old policy") {
    const TabularMdp mdp = build_random_mdp(2, 2, 0.5, 3);
    Eigen::MatrixXd rows(2, 2);
    rows << 0.9, 0.1, 0.3, 0.7;
    const TabularPolicy pi(rows);
    const auto batch = draw_batch(mdp, pi, Eigen::Vector2d(0.25, 0.75), 40000, 7);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& sa : batch) counts(sa.state, sa.action) += 1.0;
    counts /= 40000.0;
    Eigen::MatrixXd expected(2, 2);
    expected << 0.25 * 0.9, 0.25 * 0.1, 0.75 * 0.3, 0.75 * 0.7;
    CHECK((counts - expected).cwiseAbs().maxCoeff() < 0.01);
    CHECK(draw_batch(mdp, pi, Eigen::Vector2d(0.25, 0.75), 10, 7).front().state ==
          draw_batch(mdp, pi, Eigen::Vector2d(0.25, 0.75), 10, 7).front().state);
    CHECK_THROWS_AS(monte_carlo_objective(mdp, pi, pi, DriftSpec{}, Eigen::Vector2d(0.5, 0.5), {}),
                    std::invalid_argument);
}

TEST_CASE("off-policy estimate from a historical policy") {
    std::mt19937_64 rng(4);
    const TabularMdp mdp = build_random_mdp(3, 3, 0.7, 8);
    const TabularPolicy pi_old = random_interior(rng, 3, 3);
    const TabularPolicy pi_hist = random_interior(rng, 3, 3);
    const TabularPolicy pibar = random_interior(rng, 3, 3);
    const Eigen::VectorXd beta = random_beta(rng, 3);
    const ValueTables t = evaluate_policy(mdp, pi_old);
    double target = 0.0;
    for (int s = 0; s < 3; ++s) target += beta(s) * pibar.probs().row(s).dot(t.q.row(s));

    std::vector<BufferEntry> exact;
    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 3; ++a) exact.push_back({s, a, pi_hist(s, a), t.q(s, a), beta(s) * pi_hist(s, a)});
    }
    CHECK(std::abs(off_policy_estimate(pibar, exact).mean - target) < 1e-12);
    CHECK(std::abs(target - mirror_objective(mdp, pi_old, pibar, DriftSpec{}, beta)) < 1e-12);

    std::vector<BufferEntry> sampled;
    for (const auto& sa : draw_batch(mdp, pi_hist, beta, 100000, 5)) {
        sampled.push_back({sa.state, sa.action, pi_hist(sa.state, sa.action), t.q(sa.state, sa.action)});
    }
    const Estimate est = off_policy_estimate(pibar, sampled);
    CHECK(std::abs(est.mean - target) <= 3.0 * est.std_error);
}

TEST_CASE("corrupt replay buffers are rejected") {
    const TabularPolicy pibar = TabularPolicy::uniform(1, 2);
    CHECK_THROWS_AS(off_policy_estimate(pibar, {}), std::invalid_argument);
    CHECK_THROWS_AS(off_policy_estimate(pibar, {{0, 0, 0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(off_policy_estimate(pibar, {{0, 0, 1.5, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(off_policy_estimate(pibar, {{0, 0, 0.5, 1.0, -1.0}}), std::invalid_argument);
    CHECK(off_policy_estimate(pibar, {{0, 1, 0.25, 2.0}}).mean == doctest::Approx(4.0));
}
