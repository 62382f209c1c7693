#include "gboed/dgp.hpp"

#include <cmath>
#include <stdexcept>

namespace gboed {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double noisy_outcome(const TrueProcess& proc, std::span<const double> xi, Rng& rng)
{
    const Model& model = proc.model;
    const auto* errors = std::get_if<ErrorDistribution>(&proc.scenario);
    if (errors == nullptr) {
        return model_simulate(model, proc.theta_star, xi, rng);
    }
    return std::visit(
        Overloaded{
            [&](const LaplaceErrors&) {
                const Moments m = model.moments(proc.theta_star, xi);
                return sample(ScalarDist{Laplace(m.mean, m.std)}, rng);
            },
            [&](const PkNoise& noise) {
                auto pk = std::get<Pharmacokinetic>(model.spec());
                pk.mult_var = noise.mult_var;
                pk.add_var = noise.add_var;
                return model_simulate(Model(pk), proc.theta_star, xi, rng);
            },
            [&](const ScaledNoise& noise) {
                auto lf = std::get<LocationFinding>(model.spec());
                lf.sigma = noise.sigma;
                return model_simulate(Model(lf), proc.theta_star, xi, rng);
            },
        },
        *errors);
}

}  // namespace

void validate(const Scenario& scenario, const Model& model)
{
    if (const auto* out = std::get_if<AsymmetricOutliers>(&scenario)) {
        if (!(out->prob >= 0.0 && out->prob <= 1.0)) {
            throw std::invalid_argument("AsymmetricOutliers: prob must lie in [0, 1]");
        }
        if (!(out->shift_lo < out->shift_hi)) {
            throw std::invalid_argument("AsymmetricOutliers: shift bounds need lo < hi");
        }
    }
    if (const auto* err = std::get_if<ErrorDistribution>(&scenario)) {
        const bool ok = std::visit(
            Overloaded{
                [&](const LaplaceErrors&) { return true; },
                [&](const PkNoise& n) {
                    return std::holds_alternative<Pharmacokinetic>(model.spec()) &&
                           n.mult_var >= 0.0 && n.add_var > 0.0;
                },
                [&](const ScaledNoise& n) {
                    return std::holds_alternative<LocationFinding>(model.spec()) && n.sigma > 0.0;
                },
            },
            *err);
        if (!ok) {
            throw std::invalid_argument("ErrorDistribution scenario does not match the model");
        }
    }
}

AsymmetricOutliers default_outliers(const Model& model)
{
    return std::visit(Overloaded{
                          [](const LinearRegression& m) {
                              return AsymmetricOutliers{0.3, 3.0 * m.sigma, 9.0 * m.sigma};
                          },
                          [](const Pharmacokinetic&) { return AsymmetricOutliers{0.5, 3.0, 7.0}; },
                          [](const LocationFinding& m) {
                              return AsymmetricOutliers{0.3, 3.0 * m.sigma, 7.0 * m.sigma};
                          },
                      },
                      model.spec());
}

double dgp_sample(const TrueProcess& proc, std::span<const double> xi, Rng& rng)
{
    Rng contamination = rng.split(1).front();
    const double clean = noisy_outcome(proc, xi, rng);
    if (const auto* out = std::get_if<AsymmetricOutliers>(&proc.scenario)) {
        const double u = contamination.uniform01();
        const double shift = sample(ScalarDist{Uniform(out->shift_lo, out->shift_hi)}, contamination);
        if (u < out->prob) {
            return clean - shift;
        }
    }
    return clean;
}

std::vector<double> dgp_predictive_reference(const TrueProcess& proc, std::span<const double> xi,
                                             std::size_t n, Rng& rng)
{
    if (n == 0) {
        throw std::invalid_argument("dgp_predictive_reference: n must be at least 1");
    }
    std::vector<double> out(n);
    for (double& y : out) {
        y = noisy_outcome(proc, xi, rng);
    }
    return out;
}

const std::vector<RegressionTruth>& regression_truths()
{
    static const std::vector<RegressionTruth> truths{
        {{10.0, -7.0}, 1.2},
        {{-3.0, 8.0}, 0.8},
        {{9.0, 9.0}, 1.0},
    };
    return truths;
}

Theta pharmacokinetic_truth() { return {1.5, 0.15, 15.0}; }

Theta location_finding_truth(std::size_t dim)
{
    static const double beta1[16] = {1.5, -1.3, 0.1, -1.8, -0.7, -1.1, 0.4, 0.4,
                                     -2.0, -1.2, -0.3, 0.2, 1.6, -1.2, 1.5, 0.8};
    static const double beta2[16] = {-1.8, 0.5, 1.9, -0.2, -1.7, 1.4, -0.5, 2.0,
                                     -1.1, 1.2, 1.6, -2.0, -0.1, 0.0, -1.6, -1.3};
    if (dim < 1 || dim > 16) {
        throw std::invalid_argument("location_finding_truth: dim must lie in [1, 16]");
    }
    Theta theta;
    theta.insert(theta.end(), beta1, beta1 + dim);
    theta.insert(theta.end(), beta2, beta2 + dim);
    return theta;
}

}  // namespace gboed
