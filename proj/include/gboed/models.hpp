#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gboed/distributions.hpp"
#include "gboed/rng.hpp"

namespace gboed {

using Theta = std::vector<double>;
using Design = std::vector<double>;

/// Mean and standard deviation of the assumed Gaussian outcome law.
struct Moments {
    double mean;
    double std;
};

/// y = theta0 + theta1 * xi + N(0, sigma^2), xi in [-4, 4].
struct LinearRegression {
    double sigma = 1.0;
};

/// One-compartment oral-dose model, theta = (k_a, k_e, V), xi in [0, 24] hours.
struct Pharmacokinetic {
    double dose = 400.0;
    double mult_var = 0.01;
    double add_var = 0.1;
};

/// K point sources in R^d; the outcome is the log of the total intensity.
/// theta = (beta_1, ..., beta_K) flattened, xi in [-4, 4]^d.
struct LocationFinding {
    std::size_t dim = 2;
    std::size_t sources = 2;
    double alpha = 1.0;
    double background = 0.1;
    double max_signal = 1e-4;
    double sigma = 0.5;
};

struct DesignSpace {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> xi) const;
    Design sample(Rng& rng) const;
};

class Model {
public:
    using Variant = std::variant<LinearRegression, Pharmacokinetic, LocationFinding>;

    Model(Variant spec);

    const Variant& spec() const { return spec_; }
    std::string name() const;

    std::size_t theta_dim() const;
    std::size_t design_dim() const;
    DesignSpace design_space() const;

    /// False when theta violates a structural constraint (PK needs k_a > k_e > 0, V > 0).
    bool valid(std::span<const double> theta) const;

    /// Throws std::domain_error for an invalid theta.
    Moments moments(std::span<const double> theta, std::span<const double> xi) const;

    /// Moments plus their gradients with respect to theta.
    Moments moments_grad(std::span<const double> theta, std::span<const double> xi,
                         std::span<double> dmean, std::span<double> dstd) const;

private:
    Variant spec_;
};

double model_mean(const Model& model, std::span<const double> theta, std::span<const double> xi);
double model_std(const Model& model, std::span<const double> theta, std::span<const double> xi);
double model_loglik(const Model& model, double y, std::span<const double> theta,
                    std::span<const double> xi);
/// d/dy log p(y | theta, xi)
double model_score(const Model& model, double y, std::span<const double> theta,
                   std::span<const double> xi);
/// d^2/dy^2 log p(y | theta, xi)
double model_score_deriv(const Model& model, double y, std::span<const double> theta,
                         std::span<const double> xi);
double model_simulate(const Model& model, std::span<const double> theta,
                      std::span<const double> xi, Rng& rng);

/// mean + std * eps with eps ~ N(0, 1); std == 0 returns the mean.
double simulate_outcome(const Moments& m, Rng& rng);

/// Diagonal Gaussian over theta, or over log(theta) when log_space is set.
/// Serves both as prior and as variational posterior family.
struct GaussianApprox {
    DiagGaussian dist;
    bool log_space = false;
    /// Reject samples unless theta[0] > theta[1] (PK absorption above elimination).
    bool ordered_rates = false;
};

using PriorSpec = GaussianApprox;

Theta prior_sample(const PriorSpec& prior, Rng& rng);
void prior_sample_into(const PriorSpec& prior, Rng& rng, std::span<double> out);
/// Density over theta itself; includes -sum(log theta) for log-space priors.
double prior_logpdf(const PriorSpec& prior, std::span<const double> theta);

/// Standard normal for LR and LF; log-normal around (1, 0.1, 20) with variance 0.05 for PK.
PriorSpec default_prior(const Model& model);

}  // namespace gboed
