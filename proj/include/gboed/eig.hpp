#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gboed/inference.hpp"
#include "gboed/losses.hpp"
#include "gboed/models.hpp"
#include "gboed/numeric.hpp"
#include "gboed/rng.hpp"

namespace gboed {

struct EigConfig {
    std::size_t outer = 10000;
    std::size_t inner = 100;
    double omega = 1.0;
    /// Share one set of inner draws across all outer samples (benchmarking only).
    bool reuse_inner = false;
};

void validate(const EigConfig& cfg);

struct EigEstimate {
    double value = 0.0;
    double ess = 0.0;
    /// max - min of the finite importance log-weights
    double spread = 0.0;
    /// delta-method standard error of the self-normalised sum
    double std_error = 0.0;
};

enum class Utility { Gibbs, Bayes, GibbsNoWeight };

/// One outer draw: outcome plus loss and log-likelihood at the generating theta.
struct OuterDraw {
    double y;
    double loss;
    double loglik;
};

template <class P>
concept NmcProblem = requires(const P& p, Rng& rng, std::span<double> out,
                              std::span<const double> theta, double y) {
    { p.theta_dim() } -> std::convertible_to<std::size_t>;
    p.sample_theta(rng, out);
    { p.observe(theta, rng) } -> std::same_as<OuterDraw>;
    { p.loss(theta, y) } -> std::convertible_to<double>;
    { p.loglik(theta, y) } -> std::convertible_to<double>;
};

namespace detail {

/// Finalises sum_i term_i Z_i with Z = softmax(log_w). Equal log-weights give Z_i = 1/N exactly.
EigEstimate weighted_estimate(const std::vector<double>& terms, const std::vector<double>& log_w,
                              bool uniform);

}  // namespace detail

/// Nested Monte Carlo estimate of the chosen utility. Draw order per outer
/// sample: theta_i, y_i, then the inner thetas (unless reused).
template <NmcProblem P>
EigEstimate nmc_eig(const P& problem, Utility utility, const EigConfig& cfg, Rng& rng)
{
    validate(cfg);
    const std::size_t d = problem.theta_dim();
    const std::size_t n = cfg.outer;
    const std::size_t m = cfg.inner;
    const double omega = utility == Utility::Bayes ? 1.0 : cfg.omega;
    const double log_m = std::log(static_cast<double>(m));

    auto value = [&](std::span<const double> th, double y) {
        return utility == Utility::Bayes ? problem.loglik(th, y) : -omega * problem.loss(th, y);
    };

    std::vector<double> shared;
    if (cfg.reuse_inner) {
        shared.resize(m * d);
        for (std::size_t j = 0; j < m; ++j) {
            problem.sample_theta(rng, std::span<double>(shared.data() + j * d, d));
        }
    }
    std::vector<double> theta(d), inner_theta(d), inner(m);
    std::vector<double> terms(n), log_w(n);
    for (std::size_t i = 0; i < n; ++i) {
        problem.sample_theta(rng, theta);
        const OuterDraw o = problem.observe(theta, rng);
        const double a = utility == Utility::Bayes ? o.loglik : -omega * o.loss;
        auto explicit_inner = [&] {
            for (std::size_t j = 0; j < m; ++j) {
                if (cfg.reuse_inner) {
                    inner[j] = value(std::span<const double>(shared.data() + j * d, d), o.y);
                } else {
                    problem.sample_theta(rng, inner_theta);
                    inner[j] = value(inner_theta, o.y);
                }
            }
            return log_sum_exp(inner);
        };
        double lse;
        if constexpr (requires { problem.inner_log_sum(o.y, m, value, rng); }) {
            lse = cfg.reuse_inner ? explicit_inner() : problem.inner_log_sum(o.y, m, value, rng);
        } else {
            lse = explicit_inner();
        }
        terms[i] = a - lse + log_m;
        log_w[i] = utility == Utility::Gibbs ? a - o.loglik : 0.0;
    }
    return detail::weighted_estimate(terms, log_w, utility != Utility::Gibbs);
}

/// Adapter exposing (prior, model, loss) at a fixed design to the NMC core.
class ModelProblem {
public:
    /// `belief` must outlive the adapter.
    ModelProblem(const Model& model, const Belief& belief, const LossSpec& loss,
                 const LossContext& ctx, std::span<const double> xi);

    std::size_t theta_dim() const { return model_.theta_dim(); }
    void sample_theta(Rng& rng, std::span<double> out) const
    {
        gboed::sample_theta(belief_, rng, out);
    }
    OuterDraw observe(std::span<const double> theta, Rng& rng) const;
    double loss(std::span<const double> theta, double y) const;
    double loglik(std::span<const double> theta, double y) const;

private:
    Model model_;
    const Belief& belief_;
    LossKind kind_;
    ImqParams imq_;
    Design xi_;
};

EigEstimate gibbs_eig_nmc(const Model& model, const Belief& prior, const LossSpec& loss,
                          const LossContext& ctx, std::span<const double> xi,
                          const EigConfig& cfg, Rng& rng);

EigEstimate beig_nmc(const Model& model, const Belief& prior, std::span<const double> xi,
                     const EigConfig& cfg, Rng& rng);

/// Gibbs terms averaged with uniform weights (no importance correction).
EigEstimate gibbs_eig_noweight(const Model& model, const Belief& prior, const LossSpec& loss,
                               const LossContext& ctx, std::span<const double> xi,
                               const EigConfig& cfg, Rng& rng);

EigEstimate eig_estimate(Utility utility, const Model& model, const Belief& prior,
                         const LossSpec& loss, const LossContext& ctx,
                         std::span<const double> xi, const EigConfig& cfg, Rng& rng);

/// One split stream per design, assigned by the design's rank in lexicographic
/// order, so the result for a design does not depend on list order.
std::vector<EigEstimate> eig_surface(Utility utility, const Model& model, const Belief& prior,
                                     const LossSpec& loss, const LossContext& ctx,
                                     const std::vector<Design>& designs, const EigConfig& cfg,
                                     Rng& rng);

/// Stream index of each design under eig_surface's canonical ordering.
std::vector<std::size_t> canonical_ranks(const std::vector<Design>& designs);

/// Finite parameter set with tabulated outcome probabilities and losses.
struct DiscreteToy {
    std::vector<double> prior;             // K
    std::vector<double> outcomes;          // Y
    std::vector<std::vector<double>> prob; // K x Y, p(y | theta)
    std::vector<std::vector<double>> loss; // K x Y

    std::size_t size() const { return prior.size(); }
    void validate() const;
};

/// Gaussian outcome law with means[k] and common sigma, tabulated on a uniform
/// outcome grid as density * spacing; losses from `kind` at the same moments.
DiscreteToy make_gaussian_toy(std::vector<double> prior, const std::vector<double>& means,
                              double sigma, std::vector<double> outcomes, LossKind kind,
                              const ImqParams& imq = {});

struct QuadratureEig {
    double pseudo_joint;  // pseudo-mutual information
    double expected_kl;   // pseudo-expected KL(posterior || prior)
    double loss_form;     // -omega*loss - log marginal under prior * exp(-omega*loss)
    double importance;    // expectation under prior x model with importance ratio
    double total_mass;    // sum_y of the marginal generalised likelihood
    /// The quantity the self-normalised estimator targets.
    double normalised() const { return importance / total_mass; }
};

/// Exhaustive summation of the Gibbs EIG on a discrete toy. Throws if any
/// outcome row fails to sum to 1 within 1e-6.
QuadratureEig eig_quadrature_oracle(const DiscreteToy& toy, double omega);

/// NMC adapter for a discrete toy; theta is carried as its index.
/// Inner sums use multinomial counts over the K support points.
class ToyProblem {
public:
    explicit ToyProblem(const DiscreteToy& toy);

    std::size_t theta_dim() const { return 1; }
    void sample_theta(Rng& rng, std::span<double> out) const;
    OuterDraw observe(std::span<const double> theta, Rng& rng) const;
    double loss(std::span<const double> theta, double y) const;
    double loglik(std::span<const double> theta, double y) const;

    template <class F>
    double inner_log_sum(double y, std::size_t m, const F& value, Rng& rng) const
    {
        const auto counts = multinomial(m, rng);
        std::vector<double> parts;
        parts.reserve(counts.size());
        double k_theta = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0) {
                continue;
            }
            k_theta = static_cast<double>(k);
            parts.push_back(std::log(static_cast<double>(counts[k])) +
                            value(std::span<const double>(&k_theta, 1), y));
        }
        return log_sum_exp(parts);
    }

private:
    std::vector<std::size_t> multinomial(std::size_t m, Rng& rng) const;
    std::size_t outcome_index(double y) const;

    const DiscreteToy* toy_;
    std::vector<double> prior_cdf_;
    std::vector<std::vector<double>> prob_cdf_;
};

EigEstimate toy_eig_nmc(const DiscreteToy& toy, Utility utility, const EigConfig& cfg, Rng& rng);

}  // namespace gboed
