#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gboed/losses.hpp"
#include "gboed/models.hpp"
#include "gboed/rng.hpp"

namespace gboed {

/// One experiment: design, outcome, 1-based step, and the IMQ parameters that
/// were in force when it was observed (used only by weighted losses).
struct Observation {
    Design xi;
    double y = 0.0;
    int step = 1;
    ImqParams imq{};
};

using ExperimentHistory = std::vector<Observation>;

/// Throws unless steps are strictly increasing from 1.
void validate_history(const ExperimentHistory& hist);

/// Prior draws with self-normalised Gibbs weights.
struct ParticlePosterior {
    std::size_t dim = 0;
    std::vector<double> particles;    // row-major, size() x dim
    std::vector<double> log_weights;  // unnormalised
    std::vector<double> weights;      // normalised
    std::vector<double> cumulative;

    std::size_t size() const { return log_weights.size(); }
    std::span<const double> particle(std::size_t i) const
    {
        return {particles.data() + i * dim, dim};
    }
    double ess() const;
};

using Belief = std::variant<GaussianApprox, ParticlePosterior>;

std::size_t theta_dim(const Belief& belief);
/// Gaussian beliefs honour log_space and ordered_rates; particle beliefs resample by weight.
void sample_theta(const Belief& belief, Rng& rng, std::span<double> out);

/// Total loss of theta against the history (each record with its own IMQ parameters).
double history_loss(const Model& model, LossKind kind, const ExperimentHistory& hist,
                    std::span<const double> theta);

/// Normalises weights = softmax(log_weights); throws if every log-weight is -inf.
ParticlePosterior make_particle_posterior(std::size_t dim, std::vector<double> particles,
                                          std::vector<double> log_weights);

/// Reweights prior draws by exp(-omega * loss_fn(theta)).
ParticlePosterior snis_reweight(std::size_t dim, std::vector<double> particles, double omega,
                                const std::function<double(std::span<const double>)>& loss_fn);

ParticlePosterior snis_posterior(const PriorSpec& prior, const Model& model, const LossSpec& loss,
                                 double omega, const ExperimentHistory& hist,
                                 std::size_t n_particles, Rng& rng);

enum class GradientMode { Pathwise, FiniteDifference };

struct VariationalConfig {
    int steps = 10000;
    double step_size = 0.005;
    int n_mc = 8;
    GradientMode gradient = GradientMode::Pathwise;
    double fd_step = 1e-5;
};

/// Monte Carlo generalised ELBO E_q[-omega * loss + log prior - log q].
/// Draws violating the model's parameter constraints carry zero weight.
double gelbo(const GaussianApprox& q, const PriorSpec& prior, const Model& model, LossKind loss,
             double omega, const ExperimentHistory& hist, int n_mc, Rng& rng);

/// Stochastic gradient estimate of the gELBO with respect to (mean, raw softplus scale),
/// using the supplied standard-normal draws (n_mc x dim, row-major).
struct ElboGradient {
    std::vector<double> d_mean;
    std::vector<double> d_raw_scale;
    double objective;
};
ElboGradient gelbo_gradient(std::span<const double> mean, std::span<const double> raw_scale,
                            const PriorSpec& prior, const Model& model, LossKind loss,
                            double omega, const ExperimentHistory& hist,
                            std::span<const double> noise, GradientMode mode, double fd_step);

/// Adam ascent on the gELBO over a diagonal Gaussian (log-space when the prior is).
/// Starts from `init` when given, otherwise from the prior.
GaussianApprox fit_variational(const PriorSpec& prior, const Model& model, LossKind loss,
                               double omega, const ExperimentHistory& hist,
                               const VariationalConfig& config, Rng& rng,
                               const std::optional<GaussianApprox>& init = std::nullopt);

struct PredictiveSummary {
    std::vector<Design> designs;
    std::vector<std::vector<double>> samples;
    std::vector<double> mean;
    std::vector<double> std;
};

/// n posterior-predictive draws per design, one split stream per design.
PredictiveSummary predictive_summary(const Belief& belief, const Model& model,
                                     const std::vector<Design>& designs, std::size_t n, Rng& rng);

/// Weighted cloud of parameter draws whose predictive moments are exact
/// mixture moments at any design.
class PredictiveCloud {
public:
    PredictiveCloud(const Belief& belief, const Model& model, std::size_t n_samples, Rng& rng);

    PredictiveMoments operator()(std::span<const double> xi) const;

private:
    Model model_;
    std::size_t dim_;
    std::vector<double> thetas_;
    std::vector<double> weights_;
};

/// Context for experiment `index`; predictive summaries come from a frozen cloud.
LossContext make_loss_context(const Belief& belief, const Model& model, int index,
                              std::size_t n_samples, Rng& rng, double amplitude = 1.0);

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Exact linear-Gaussian posterior for features (1, xi).
GaussianPosterior conjugate_lr_posterior(const DiagGaussian& prior, double sigma,
                                         const ExperimentHistory& hist);

}  // namespace gboed
