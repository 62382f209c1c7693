#pragma once

#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include "gboed/rng.hpp"

namespace gboed {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

struct Normal {
    double mean;
    double std;
    Normal(double mean, double std);
};

struct Laplace {
    double loc;
    double scale;
    Laplace(double loc, double scale);
};

struct Uniform {
    double lo;
    double hi;
    Uniform(double lo, double hi);
};

using ScalarDist = std::variant<Normal, Laplace, Uniform>;

double logpdf(const ScalarDist& dist, double x);
double sample(const ScalarDist& dist, Rng& rng);

/// Unchecked Gaussian log-density; callers guarantee std > 0.
inline double normal_logpdf(double x, double mean, double std)
{
    const double z = (x - mean) / std;
    return -0.5 * z * z - std::log(std) - kLogSqrt2Pi;
}

class DiagGaussian {
public:
    DiagGaussian() = default;
    DiagGaussian(std::vector<double> mean, std::vector<double> std);

    std::size_t dim() const { return mean_.size(); }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& std() const { return std_; }

    double logpdf(std::span<const double> x) const;
    std::vector<double> sample(Rng& rng) const;
    void sample_into(Rng& rng, std::span<double> out) const;

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

double logpdf(const DiagGaussian& dist, std::span<const double> x);
std::vector<double> sample(const DiagGaussian& dist, Rng& rng);

}  // namespace gboed
