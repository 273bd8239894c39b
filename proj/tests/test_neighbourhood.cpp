#include "doctest.h"

#include "mirror/environments.hpp"
#include "mirror/neighbourhood.hpp"

#include <cmath>
#include <limits>
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

/// Two states, two actions, every transition row uniform, uniform d: the
/// normalised visitation is uniform under every policy.
TabularMdp uniform_mixing_mdp() {
    TabularMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.reward = Eigen::MatrixXd::Zero(2, 2);
    mdp.transition = {Eigen::MatrixXd::Constant(2, 2, 0.5), Eigen::MatrixXd::Constant(2, 2, 0.5)};
    mdp.gamma = 0.9;
    mdp.initial_dist = Eigen::Vector2d(0.5, 0.5);
    return mdp;
}

std::vector<NeighbourhoodSpec> all_balls() {
    return {NeighbourhoodSpec::avg_kl_ball(0.01), NeighbourhoodSpec::drift_ball(DriftSpec::make(DriftKind::kl), 0.05),
            NeighbourhoodSpec::drift_ball(DriftSpec::make(DriftKind::sq_tv), 0.05),
            NeighbourhoodSpec::param_l2_ball(1.0)};
}

}  // namespace

TEST_CASE("spec validation") {
    CHECK_NOTHROW(NeighbourhoodSpec::trivial().validate());
    CHECK_THROWS_AS(NeighbourhoodSpec::avg_kl_ball(0.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(NeighbourhoodSpec::param_l2_ball(-1.0).validate(), std::invalid_argument);
    for (const auto kind : {NeighbourhoodKind::trivial, NeighbourhoodKind::avg_kl_ball, NeighbourhoodKind::drift_ball,
                            NeighbourhoodKind::param_l2_ball}) {
        CHECK(parse_neighbourhood_kind(to_string(kind)) == kind);
    }
    CHECK_FALSE(parse_neighbourhood_kind("box").has_value());
}

TEST_CASE("the centre sits at margin radius") {
    std::mt19937_64 rng(1);
    const TabularMdp mdp = build_random_mdp(3, 3, 0.8, 5);
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(3, 1.0 / 3);
    for (int t = 0; t < 20; ++t) {
        const TabularPolicy pi = random_interior(rng, 3, 3);
        for (const auto& ball : all_balls()) {
            CHECK(membership_margin(ball, mdp, pi, pi, beta) == doctest::Approx(ball.radius).epsilon(1e-12));
            const SoftmaxPolicy logits = SoftmaxPolicy::from_simplex(pi);
            CHECK(membership_margin(ball, mdp, logits, logits, beta) == doctest::Approx(ball.radius).epsilon(1e-12));
        }
    }
}

TEST_CASE("trivial neighbourhood contains everything") {
    std::mt19937_64 rng(2);
    const TabularMdp mdp = build_random_mdp(2, 3, 0.5, 1);
    const Eigen::Vector2d beta(0.5, 0.5);
    const TabularPolicy far = TabularPolicy::deterministic(std::vector<int>{2, 2}, 3);
    const double margin = membership_margin(NeighbourhoodSpec::trivial(), mdp, random_interior(rng, 2, 3), far, beta);
    CHECK(margin == std::numeric_limits<double>::infinity());
}

TEST_CASE("average kl ball: hand-averaged example") {
    const TabularMdp mdp = uniform_mixing_mdp();
    const TabularPolicy pi = TabularPolicy::uniform(2, 2);
    // KL((1/2, 1/2) || (q, 1 - q)) = -ln(4 q (1 - q)) / 2 = 0.05
    const double q = 0.5 * (1.0 + std::sqrt(1.0 - std::exp(-0.1)));
    Eigen::MatrixXd rows(2, 2);
    rows << q, 1 - q, 1 - q, q;
    const TabularPolicy pibar(rows);
    CHECK(divergence(DivergenceKind::kl, pi.row(0), pibar.row(0)) == doctest::Approx(0.05).epsilon(1e-12));
    const double margin =
        membership_margin(NeighbourhoodSpec::avg_kl_ball(0.01), mdp, pi, pibar, Eigen::Vector2d(0.5, 0.5));
    CHECK(margin == doctest::Approx(-0.04).epsilon(1e-12));
}

TEST_CASE("drift ball distance is the beta-weighted drift") {
    std::mt19937_64 rng(3);
    const TabularMdp mdp = build_random_mdp(3, 2, 0.7, 2);
    const TabularPolicy pi = random_interior(rng, 3, 2);
    const TabularPolicy pibar = random_interior(rng, 3, 2);
    const Eigen::Vector3d beta(0.2, 0.3, 0.5);
    double expected = 0.0;
    for (int s = 0; s < 3; ++s) expected += beta(s) * divergence(DivergenceKind::sq_l2, pi.row(s), pibar.row(s));
    const auto ball = NeighbourhoodSpec::drift_ball(DriftSpec::make(DriftKind::sq_l2), 0.05);
    CHECK(neighbourhood_distance(ball, mdp, pi, pibar, beta) == doctest::Approx(expected).epsilon(1e-13));

    // a trivial reference drift measures nothing
    const auto flat = NeighbourhoodSpec::drift_ball(DriftSpec{}, 0.05);
    CHECK(neighbourhood_distance(flat, mdp, pi, pibar, beta) == 0.0);
}

TEST_CASE("parameter ball measures the logit difference") {
    const TabularMdp mdp = build_random_mdp(2, 2, 0.5, 3);
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0.0, 1.0, 2.0, -1.0;
    b << 0.3, 1.0, 2.0, -1.4;
    const double margin = membership_margin(NeighbourhoodSpec::param_l2_ball(1.0), mdp, SoftmaxPolicy(a),
                                            SoftmaxPolicy(b), Eigen::Vector2d(0.5, 0.5));
    CHECK(margin == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("shrinking the radius nests the balls") {
    std::mt19937_64 rng(4);
    const TabularMdp mdp = build_random_mdp(3, 3, 0.8, 7);
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(3, 1.0 / 3);
    for (int t = 0; t < 50; ++t) {
        const TabularPolicy pi = random_interior(rng, 3, 3);
        const TabularPolicy pibar = random_interior(rng, 3, 3);
        for (auto ball : all_balls()) {
            const double wide = membership_margin(ball, mdp, pi, pibar, beta);
            ball.radius *= 0.5;
            const double narrow = membership_margin(ball, mdp, pi, pibar, beta);
            CHECK(wide - narrow == doctest::Approx(ball.radius).epsilon(1e-10));
            if (narrow >= 0.0) CHECK(wide >= 0.0);
        }
    }
}

TEST_CASE("margin is continuous in pibar") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const TabularMdp mdp = build_random_mdp(3, 3, 0.8, 9);
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(3, 1.0 / 3);
    for (const auto& ball : all_balls()) {
        double worst = 0.0;
        for (int t = 0; t < 50; ++t) {
            const TabularPolicy pi = random_interior(rng, 3, 3);
            const TabularPolicy pibar = random_interior(rng, 3, 3);
            Eigen::MatrixXd nudged = pibar.probs();
            for (int s = 0; s < 3; ++s) {
                Eigen::Vector3d v(unit(rng), unit(rng), unit(rng));
                v.array() -= v.mean();
                nudged.row(s) += 1e-7 * v.transpose() / v.cwiseAbs().maxCoeff();
            }
            const double a = membership_margin(ball, mdp, pi, pibar, beta);
            const double b = membership_margin(ball, mdp, pi, TabularPolicy(nudged), beta);
            worst = std::max(worst, std::abs(a - b) / 1e-7);
        }
        INFO("ball " << to_string(ball.kind));
        CHECK(worst < 1e3);
    }
}
