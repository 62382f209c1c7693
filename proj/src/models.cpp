#include "gboed/models.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gboed {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_sizes(const Model& model, std::span<const double> theta, std::span<const double> xi)
{
    if (theta.size() != model.theta_dim() || xi.size() != model.design_dim()) {
        throw std::invalid_argument(model.name() + ": theta/design dimension mismatch");
    }
}

struct PkTerms {
    double z;
    double dz_dka;
    double dz_dke;
    double dz_dv;
};

PkTerms pk_terms(const Pharmacokinetic& pk, std::span<const double> theta, double t)
{
    const double ka = theta[0];
    const double ke = theta[1];
    const double v = theta[2];
    const double gap = ka - ke;
    const double scale = pk.dose / v;
    const double ratio = ka / gap;
    const double eke = std::exp(-ke * t);
    const double eka = std::exp(-ka * t);
    const double shape = eke - eka;
    const double z = scale * ratio * shape;
    return {
        z,
        scale * (-ke / (gap * gap) * shape + ratio * t * eka),
        scale * (ka / (gap * gap) * shape - ratio * t * eke),
        -z / v,
    };
}

}  // namespace

bool DesignSpace::contains(std::span<const double> xi) const
{
    if (xi.size() != dim()) {
        return false;
    }
    for (std::size_t k = 0; k < dim(); ++k) {
        if (!(xi[k] >= lo[k] && xi[k] <= hi[k])) {
            return false;
        }
    }
    return true;
}

Design DesignSpace::sample(Rng& rng) const
{
    Design xi(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
        xi[k] = lo[k] + (hi[k] - lo[k]) * rng.uniform01();
    }
    return xi;
}

Model::Model(Variant spec) : spec_(std::move(spec))
{
    std::visit(Overloaded{
                   [](const LinearRegression& m) {
                       if (!(m.sigma > 0.0)) {
                           throw std::invalid_argument("LinearRegression: sigma must be positive");
                       }
                   },
                   [](const Pharmacokinetic& m) {
                       if (!(m.dose > 0.0) || !(m.mult_var >= 0.0) || !(m.add_var > 0.0)) {
                           throw std::invalid_argument("Pharmacokinetic: invalid noise or dose");
                       }
                   },
                   [](const LocationFinding& m) {
                       if (m.dim < 1 || m.sources < 1 || !(m.background > 0.0) ||
                           !(m.max_signal > 0.0) || !(m.sigma > 0.0) || !(m.alpha > 0.0)) {
                           throw std::invalid_argument("LocationFinding: invalid parameters");
                       }
                   },
               },
               spec_);
}

std::string Model::name() const
{
    return std::visit(Overloaded{
                          [](const LinearRegression&) { return std::string("linear_regression"); },
                          [](const Pharmacokinetic&) { return std::string("pharmacokinetic"); },
                          [](const LocationFinding&) { return std::string("location_finding"); },
                      },
                      spec_);
}

std::size_t Model::theta_dim() const
{
    return std::visit(Overloaded{
                          [](const LinearRegression&) -> std::size_t { return 2; },
                          [](const Pharmacokinetic&) -> std::size_t { return 3; },
                          [](const LocationFinding& m) -> std::size_t { return m.dim * m.sources; },
                      },
                      spec_);
}

std::size_t Model::design_dim() const
{
    if (const auto* lf = std::get_if<LocationFinding>(&spec_)) {
        return lf->dim;
    }
    return 1;
}

DesignSpace Model::design_space() const
{
    return std::visit(Overloaded{
                          [](const LinearRegression&) { return DesignSpace{{-4.0}, {4.0}}; },
                          [](const Pharmacokinetic&) { return DesignSpace{{0.0}, {24.0}}; },
                          [](const LocationFinding& m) {
                              return DesignSpace{std::vector<double>(m.dim, -4.0),
                                                 std::vector<double>(m.dim, 4.0)};
                          },
                      },
                      spec_);
}

bool Model::valid(std::span<const double> theta) const
{
    if (theta.size() != theta_dim()) {
        return false;
    }
    if (std::holds_alternative<Pharmacokinetic>(spec_)) {
        return theta[1] > 0.0 && theta[0] > theta[1] && theta[2] > 0.0;
    }
    return true;
}

Moments Model::moments(std::span<const double> theta, std::span<const double> xi) const
{
    check_sizes(*this, theta, xi);
    return std::visit(
        Overloaded{
            [&](const LinearRegression& m) {
                return Moments{theta[0] + theta[1] * xi[0], m.sigma};
            },
            [&](const Pharmacokinetic& m) {
                if (!valid(theta)) {
                    throw std::domain_error("pharmacokinetic: requires k_a > k_e > 0 and V > 0");
                }
                const double z = pk_terms(m, theta, xi[0]).z;
                return Moments{z, std::sqrt(m.mult_var * z * z + m.add_var)};
            },
            [&](const LocationFinding& m) {
                double intensity = m.background;
                for (std::size_t s = 0; s < m.sources; ++s) {
                    double dist2 = 0.0;
                    for (std::size_t k = 0; k < m.dim; ++k) {
                        const double diff = theta[s * m.dim + k] - xi[k];
                        dist2 += diff * diff;
                    }
                    intensity += m.alpha / (m.max_signal + dist2);
                }
                return Moments{std::log(intensity), m.sigma};
            },
        },
        spec_);
}

Moments Model::moments_grad(std::span<const double> theta, std::span<const double> xi,
                            std::span<double> dmean, std::span<double> dstd) const
{
    check_sizes(*this, theta, xi);
    if (dmean.size() != theta.size() || dstd.size() != theta.size()) {
        throw std::invalid_argument("moments_grad: gradient buffers have wrong size");
    }
    std::fill(dstd.begin(), dstd.end(), 0.0);
    return std::visit(
        Overloaded{
            [&](const LinearRegression& m) {
                dmean[0] = 1.0;
                dmean[1] = xi[0];
                return Moments{theta[0] + theta[1] * xi[0], m.sigma};
            },
            [&](const Pharmacokinetic& m) {
                if (!valid(theta)) {
                    throw std::domain_error("pharmacokinetic: requires k_a > k_e > 0 and V > 0");
                }
                const PkTerms t = pk_terms(m, theta, xi[0]);
                const double sd = std::sqrt(m.mult_var * t.z * t.z + m.add_var);
                const double dsd_dz = m.mult_var * t.z / sd;
                dmean[0] = t.dz_dka;
                dmean[1] = t.dz_dke;
                dmean[2] = t.dz_dv;
                for (std::size_t k = 0; k < 3; ++k) {
                    dstd[k] = dsd_dz * dmean[k];
                }
                return Moments{t.z, sd};
            },
            [&](const LocationFinding& m) {
                double intensity = m.background;
                for (std::size_t s = 0; s < m.sources; ++s) {
                    double dist2 = 0.0;
                    for (std::size_t k = 0; k < m.dim; ++k) {
                        const double diff = theta[s * m.dim + k] - xi[k];
                        dist2 += diff * diff;
                    }
                    const double denom = m.max_signal + dist2;
                    intensity += m.alpha / denom;
                    const double coef = -2.0 * m.alpha / (denom * denom);
                    for (std::size_t k = 0; k < m.dim; ++k) {
                        dmean[s * m.dim + k] = coef * (theta[s * m.dim + k] - xi[k]);
                    }
                }
                for (double& g : dmean) {
                    g /= intensity;
                }
                return Moments{std::log(intensity), m.sigma};
            },
        },
        spec_);
}

double model_mean(const Model& model, std::span<const double> theta, std::span<const double> xi)
{
    return model.moments(theta, xi).mean;
}

double model_std(const Model& model, std::span<const double> theta, std::span<const double> xi)
{
    return model.moments(theta, xi).std;
}

double model_loglik(const Model& model, double y, std::span<const double> theta,
                    std::span<const double> xi)
{
    const Moments m = model.moments(theta, xi);
    return normal_logpdf(y, m.mean, m.std);
}

double model_score(const Model& model, double y, std::span<const double> theta,
                   std::span<const double> xi)
{
    const Moments m = model.moments(theta, xi);
    return -(y - m.mean) / (m.std * m.std);
}

double model_score_deriv(const Model& model, double /*y*/, std::span<const double> theta,
                         std::span<const double> xi)
{
    const Moments m = model.moments(theta, xi);
    return -1.0 / (m.std * m.std);
}

double simulate_outcome(const Moments& m, Rng& rng)
{
    const double eps = rng.normal();
    if (m.std == 0.0) {
        return m.mean;
    }
    return m.mean + m.std * eps;
}

double model_simulate(const Model& model, std::span<const double> theta,
                      std::span<const double> xi, Rng& rng)
{
    return simulate_outcome(model.moments(theta, xi), rng);
}

void prior_sample_into(const PriorSpec& prior, Rng& rng, std::span<double> out)
{
    constexpr int kMaxRetries = 1000;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
        prior.dist.sample_into(rng, out);
        if (prior.log_space) {
            for (double& v : out) {
                v = std::exp(v);
            }
        }
        if (!prior.ordered_rates || out[0] > out[1]) {
            return;
        }
    }
    throw std::runtime_error("prior_sample: rate ordering constraint not met after 1000 retries");
}

Theta prior_sample(const PriorSpec& prior, Rng& rng)
{
    Theta theta(prior.dist.dim());
    prior_sample_into(prior, rng, theta);
    return theta;
}

double prior_logpdf(const PriorSpec& prior, std::span<const double> theta)
{
    if (theta.size() != prior.dist.dim()) {
        throw std::invalid_argument("prior_logpdf: dimension mismatch");
    }
    if (!prior.log_space) {
        return prior.dist.logpdf(theta);
    }
    std::vector<double> u(theta.size());
    double log_jacobian = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        if (!(theta[k] > 0.0)) {
            return -std::numeric_limits<double>::infinity();
        }
        u[k] = std::log(theta[k]);
        log_jacobian -= u[k];
    }
    return prior.dist.logpdf(u) + log_jacobian;
}

PriorSpec default_prior(const Model& model)
{
    if (std::holds_alternative<Pharmacokinetic>(model.spec())) {
        const double sd = std::sqrt(0.05);
        return PriorSpec{DiagGaussian({std::log(1.0), std::log(0.1), std::log(20.0)}, {sd, sd, sd}),
                         true, true};
    }
    const std::size_t p = model.theta_dim();
    return PriorSpec{DiagGaussian(std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)), false,
                     false};
}

}  // namespace gboed
