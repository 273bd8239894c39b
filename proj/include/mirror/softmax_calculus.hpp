#pragma once

#include <Eigen/Core>

namespace mirror {

/**
 * Pulls q-space derivatives back through q = softmax([theta, 0]).
 *
 * Given the gradient g and Hessian H of a function f(q) at q, adds
 * d f / d theta and d^2 f / d theta^2 (theta has q.size() - 1 entries) to
 * `grad_theta` and `hess_theta`. The second-order term uses the closed form
 *   sum_a g_a d^2 q_a / d theta_i d theta_j
 *     = delta_ij q_i (g_i - gbar) - q_i q_j (g_i + g_j - 2 gbar),  gbar = q.g
 * which stays accurate when some q_a are tiny.
 */
void add_pullback(const Eigen::Ref<const Eigen::VectorXd>& q, const Eigen::Ref<const Eigen::VectorXd>& grad_q,
                  const Eigen::Ref<const Eigen::MatrixXd>& hess_q, Eigen::Ref<Eigen::VectorXd> grad_theta,
                  Eigen::Ref<Eigen::MatrixXd> hess_theta);

/// Jacobian d q / d theta, size n x (n - 1).
Eigen::MatrixXd softmax_jacobian(const Eigen::Ref<const Eigen::VectorXd>& q);

}  // namespace mirror
