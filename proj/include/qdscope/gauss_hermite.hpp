#pragma once

#include <cstddef>
#include <vector>

namespace qdscope {

// Gauss-Hermite rule rescaled for expectations over a standard normal:
// E[f(xi)] ~= sum_i prob_weight[i] * f(node[i]),  xi ~ N(0,1).
struct GaussHermiteRule {
    std::vector<double> nodes;        // already scaled by sqrt(2)
    std::vector<double> prob_weights; // sum to 1
};

// Computed via Golub-Welsch; cached per order.
const GaussHermiteRule& gauss_hermite_rule(std::size_t order);

} // namespace qdscope
