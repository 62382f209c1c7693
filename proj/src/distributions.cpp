#include "gboed/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gboed {

namespace {

void require_positive(double v, const char* what)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + " must be positive and finite");
    }
}

}  // namespace

Normal::Normal(double mean_, double std_) : mean(mean_), std(std_)
{
    require_positive(std, "Normal std");
}

Laplace::Laplace(double loc_, double scale_) : loc(loc_), scale(scale_)
{
    require_positive(scale, "Laplace scale");
}

Uniform::Uniform(double lo_, double hi_) : lo(lo_), hi(hi_)
{
    if (!(lo < hi)) {
        throw std::invalid_argument("Uniform requires lo < hi");
    }
}

double logpdf(const ScalarDist& dist, double x)
{
    struct Visitor {
        double x;
        double operator()(const Normal& d) const { return normal_logpdf(x, d.mean, d.std); }
        double operator()(const Laplace& d) const
        {
            return -std::abs(x - d.loc) / d.scale - std::log(2.0 * d.scale);
        }
        double operator()(const Uniform& d) const
        {
            if (x < d.lo || x > d.hi) {
                return -std::numeric_limits<double>::infinity();
            }
            return -std::log(d.hi - d.lo);
        }
    };
    return std::visit(Visitor{x}, dist);
}

double sample(const ScalarDist& dist, Rng& rng)
{
    struct Visitor {
        Rng& rng;
        double operator()(const Normal& d) const { return d.mean + d.std * rng.normal(); }
        double operator()(const Laplace& d) const
        {
            // inverse CDF on u in (-1/2, 1/2)
            double u = rng.uniform01() - 0.5;
            while (u == -0.5) {
                u = rng.uniform01() - 0.5;
            }
            const double sgn = u < 0.0 ? -1.0 : 1.0;
            return d.loc - d.scale * sgn * std::log1p(-2.0 * std::abs(u));
        }
        double operator()(const Uniform& d) const
        {
            const double v = d.lo + (d.hi - d.lo) * rng.uniform01();
            // rounding can land exactly on hi
            return v < d.hi ? v : std::nextafter(d.hi, d.lo);
        }
    };
    return std::visit(Visitor{rng}, dist);
}

DiagGaussian::DiagGaussian(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std))
{
    if (mean_.empty() || mean_.size() != std_.size()) {
        throw std::invalid_argument("DiagGaussian: mean and std must be nonempty and of equal length");
    }
    for (double s : std_) {
        require_positive(s, "DiagGaussian std");
    }
}

double DiagGaussian::logpdf(std::span<const double> x) const
{
    if (x.size() != dim()) {
        throw std::invalid_argument("DiagGaussian::logpdf: dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) {
        acc += normal_logpdf(x[k], mean_[k], std_[k]);
    }
    return acc;
}

std::vector<double> DiagGaussian::sample(Rng& rng) const
{
    std::vector<double> out(dim());
    sample_into(rng, out);
    return out;
}

void DiagGaussian::sample_into(Rng& rng, std::span<double> out) const
{
    for (std::size_t k = 0; k < dim(); ++k) {
        out[k] = mean_[k] + std_[k] * rng.normal();
    }
}

double logpdf(const DiagGaussian& dist, std::span<const double> x) { return dist.logpdf(x); }

std::vector<double> sample(const DiagGaussian& dist, Rng& rng) { return dist.sample(rng); }

}  // namespace gboed
