#include "mirror/softmax_calculus.hpp"

namespace mirror {

Eigen::MatrixXd softmax_jacobian(const Eigen::Ref<const Eigen::VectorXd>& q) {
    const Eigen::Index n = q.size();
    Eigen::MatrixXd jac(n, n - 1);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            jac(a, i) = q(a) * ((a == i ? 1.0 : 0.0) - q(i));
        }
    }
    return jac;
}

void add_pullback(const Eigen::Ref<const Eigen::VectorXd>& q, const Eigen::Ref<const Eigen::VectorXd>& grad_q,
                  const Eigen::Ref<const Eigen::MatrixXd>& hess_q, Eigen::Ref<Eigen::VectorXd> grad_theta,
                  Eigen::Ref<Eigen::MatrixXd> hess_theta) {
    const Eigen::Index m = q.size() - 1;
    const double gbar = q.dot(grad_q);
    const Eigen::MatrixXd jac = softmax_jacobian(q);

    for (Eigen::Index i = 0; i < m; ++i) {
        grad_theta(i) += q(i) * (grad_q(i) - gbar);
    }
    hess_theta += jac.transpose() * hess_q * jac;
    for (Eigen::Index i = 0; i < m; ++i) {
        hess_theta(i, i) += q(i) * (grad_q(i) - gbar);
        for (Eigen::Index j = 0; j < m; ++j) {
            hess_theta(i, j) -= q(i) * q(j) * (grad_q(i) + grad_q(j) - 2.0 * gbar);
        }
    }
}

}  // namespace mirror
