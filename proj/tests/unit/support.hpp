#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "gboed/dgp.hpp"
#include "gboed/models.hpp"
#include "gboed/rng.hpp"

namespace testing {

inline double gauss_logpdf(double x, double m, double s)
{
    return -0.5 * std::log(2.0 * std::numbers::pi * s * s) - 0.5 * (x - m) * (x - m) / (s * s);
}

inline double sample_mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

inline double sample_var(const std::vector<double>& v)
{
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

inline gboed::Model lr(double sigma = 1.0) { return gboed::Model(gboed::LinearRegression{sigma}); }
inline gboed::Model pk() { return gboed::Model(gboed::Pharmacokinetic{}); }
inline gboed::Model lf(std::size_t dim = 2)
{
    gboed::LocationFinding l;
    l.dim = dim;
    return gboed::Model(l);
}

// Valid parameter draw from each model's own prior.
inline gboed::Theta random_theta(const gboed::Model& m, gboed::Rng& rng)
{
    for (;;) {
        auto th = gboed::prior_sample(gboed::default_prior(m), rng);
        if (m.valid(th)) {
            return th;
        }
    }
}

}  // namespace testing
