#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace gboed {

/// log(sum(exp(v))). Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v)
{
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        hi = std::max(hi, x);
    }
    if (!std::isfinite(hi)) {
        return hi;
    }
    double acc = 0.0;
    for (double x : v) {
        acc += std::exp(x - hi);
    }
    return hi + std::log(acc);
}

}  // namespace gboed
