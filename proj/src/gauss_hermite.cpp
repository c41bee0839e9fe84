#include "qdscope/gauss_hermite.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Dense>

#include "qdscope/errors.hpp"

namespace qdscope {

namespace {

GaussHermiteRule compute_rule(std::size_t order) {
    if (order < 1) throw config_error("gauss_hermite: order must be >= 1");
    const auto n = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k) {
        const double off = std::sqrt(static_cast<double>(k) / 2.0);
        jacobi(k, k - 1) = off;
        jacobi(k - 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermiteRule rule;
    rule.nodes.resize(order);
    rule.prob_weights.resize(order);
    for (Eigen::Index i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] =
            es.eigenvalues()(i) * 1.4142135623730951;
        const double v0 = es.eigenvectors()(0, i);
        rule.prob_weights[static_cast<std::size_t>(i)] = v0 * v0;
    }
    return rule;
}

} // namespace

const GaussHermiteRule& gauss_hermite_rule(std::size_t order) {
    static std::mutex mtx;
    static std::map<std::size_t, GaussHermiteRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
    return it->second;
}

} // namespace qdscope
