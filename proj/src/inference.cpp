#include "gboed/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <fmt/core.h>

#include "gboed/numeric.hpp"

namespace gboed {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplus_inv(double s) { return s > 30.0 ? s : std::log(std::expm1(s)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Unconstrained coordinates of theta (log for log-space families).
void to_theta(bool log_space, std::span<const double> u, std::span<double> theta)
{
    for (std::size_t j = 0; j < u.size(); ++j) {
        theta[j] = log_space ? std::exp(u[j]) : u[j];
    }
}

// log density of the prior over the unconstrained coordinates
double prior_logpdf_u(const PriorSpec& prior, std::span<const double> u)
{
    return prior.dist.logpdf(u);
}

bool admissible(const Model& model, const PriorSpec& prior, std::span<const double> theta)
{
    if (prior.ordered_rates && !(theta[0] > theta[1])) {
        return false;
    }
    return model.valid(theta);
}

struct SampleObjective {
    const PriorSpec& prior;
    const Model& model;
    LossKind loss;
    double omega;
    const ExperimentHistory& hist;

    // (1/n) sum_k valid_k (-omega L + log p(u_k)) + sum_j log s_j, optionally with gradients.
    double operator()(std::span<const double> mean, std::span<const double> raw,
                      std::span<const double> noise, std::vector<double>* d_mean,
                      std::vector<double>* d_raw) const
    {
        const std::size_t d = mean.size();
        const std::size_t n = noise.size() / d;
        std::vector<double> scale(d), u(d), theta(d), gu(d), dmu(d), dsd(d);
        for (std::size_t j = 0; j < d; ++j) {
            scale[j] = softplus(raw[j]);
        }
        if (d_mean != nullptr) {
            d_mean->assign(d, 0.0);
            d_raw->assign(d, 0.0);
        }
        const auto& pm = prior.dist.mean();
        const auto& ps = prior.dist.std();
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double* eps = noise.data() + k * d;
            for (std::size_t j = 0; j < d; ++j) {
                u[j] = mean[j] + scale[j] * eps[j];
            }
            to_theta(prior.log_space, u, theta);
            if (!admissible(model, prior, theta)) {
                continue;
            }
            double f = prior_logpdf_u(prior, u);
            for (std::size_t j = 0; j < d; ++j) {
                gu[j] = -(u[j] - pm[j]) / (ps[j] * ps[j]);
            }
            for (const Observation& obs : hist) {
                if (d_mean == nullptr) {
                    f -= omega * loss_from_moments(loss, obs.y, model.moments(theta, obs.xi), obs.imq);
                    continue;
                }
                const Moments m = model.moments_grad(theta, obs.xi, dmu, dsd);
                const LossPartials lp = loss_partials(loss, obs.y, m, obs.imq);
                f -= omega * lp.value;
                for (std::size_t j = 0; j < d; ++j) {
                    const double chain = prior.log_space ? theta[j] : 1.0;
                    gu[j] -= omega * (lp.d_mean * dmu[j] + lp.d_std * dsd[j]) * chain;
                }
            }
            total += f;
            if (d_mean != nullptr) {
                for (std::size_t j = 0; j < d; ++j) {
                    (*d_mean)[j] += gu[j];
                    (*d_raw)[j] += gu[j] * eps[j];
                }
            }
        }
        double entropy = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            entropy += std::log(scale[j]);
        }
        if (d_mean != nullptr) {
            for (std::size_t j = 0; j < d; ++j) {
                (*d_mean)[j] /= static_cast<double>(n);
                (*d_raw)[j] = ((*d_raw)[j] / static_cast<double>(n) + 1.0 / scale[j]) *
                              sigmoid(raw[j]);
            }
        }
        return total / static_cast<double>(n) + entropy;
    }
};

}  // namespace

void validate_history(const ExperimentHistory& hist)
{
    int prev = 0;
    for (const Observation& obs : hist) {
        if (obs.step != prev + 1) {
            throw std::invalid_argument(
                fmt::format("history steps must run 1, 2, ...; found {} after {}", obs.step, prev));
        }
        prev = obs.step;
    }
}

double ParticlePosterior::ess() const
{
    double s = 0.0;
    for (double w : weights) {
        s += w * w;
    }
    return s > 0.0 ? 1.0 / s : 0.0;
}

std::size_t theta_dim(const Belief& belief)
{
    if (const auto* g = std::get_if<GaussianApprox>(&belief)) {
        return g->dist.dim();
    }
    return std::get<ParticlePosterior>(belief).dim;
}

void sample_theta(const Belief& belief, Rng& rng, std::span<double> out)
{
    if (const auto* g = std::get_if<GaussianApprox>(&belief)) {
        prior_sample_into(*g, rng, out);
        return;
    }
    const auto& p = std::get<ParticlePosterior>(belief);
    const double u = rng.uniform01();
    auto it = std::upper_bound(p.cumulative.begin(), p.cumulative.end(), u);
    std::size_t i = static_cast<std::size_t>(it - p.cumulative.begin());
    i = std::min(i, p.size() - 1);
    while (p.weights[i] == 0.0 && i > 0) {
        --i;
    }
    const auto row = p.particle(i);
    std::copy(row.begin(), row.end(), out.begin());
}

double history_loss(const Model& model, LossKind kind, const ExperimentHistory& hist,
                    std::span<const double> theta)
{
    double total = 0.0;
    for (const Observation& obs : hist) {
        total += loss_from_moments(kind, obs.y, model.moments(theta, obs.xi), obs.imq);
    }
    return total;
}

ParticlePosterior make_particle_posterior(std::size_t dim, std::vector<double> particles,
                                          std::vector<double> log_weights)
{
    if (dim == 0 || particles.size() != dim * log_weights.size() || log_weights.empty()) {
        throw std::invalid_argument("make_particle_posterior: inconsistent particle shapes");
    }
    for (double& lw : log_weights) {
        if (std::isnan(lw)) {
            lw = -std::numeric_limits<double>::infinity();
        }
    }
    const double lse = log_sum_exp(log_weights);
    if (!std::isfinite(lse)) {
        throw std::runtime_error("particle posterior degenerate: every weight is zero");
    }
    ParticlePosterior p;
    p.dim = dim;
    p.particles = std::move(particles);
    p.weights.resize(log_weights.size());
    p.cumulative.resize(log_weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        p.weights[i] = std::exp(log_weights[i] - lse);
        acc += p.weights[i];
        p.cumulative[i] = acc;
    }
    p.log_weights = std::move(log_weights);
    return p;
}

ParticlePosterior snis_reweight(std::size_t dim, std::vector<double> particles, double omega,
                                const std::function<double(std::span<const double>)>& loss_fn)
{
    if (!(omega > 0.0)) {
        throw std::invalid_argument("learning rate omega must be positive");
    }
    const std::size_t n = dim == 0 ? 0 : particles.size() / dim;
    std::vector<double> lw(n);
    for (std::size_t i = 0; i < n; ++i) {
        lw[i] = -omega * loss_fn(std::span<const double>(particles.data() + i * dim, dim));
    }
    return make_particle_posterior(dim, std::move(particles), std::move(lw));
}

ParticlePosterior snis_posterior(const PriorSpec& prior, const Model& model, const LossSpec& loss,
                                 double omega, const ExperimentHistory& hist,
                                 std::size_t n_particles, Rng& rng)
{
    validate_history(hist);
    if (n_particles == 0) {
        throw std::invalid_argument("snis_posterior: need at least one particle");
    }
    const std::size_t d = prior.dist.dim();
    std::vector<double> particles(n_particles * d);
    for (std::size_t i = 0; i < n_particles; ++i) {
        prior_sample_into(prior, rng, std::span<double>(particles.data() + i * d, d));
    }
    auto post = snis_reweight(d, std::move(particles), omega, [&](std::span<const double> th) {
        return history_loss(model, loss.kind, hist, th);
    });
    const double frac = post.ess() / static_cast<double>(n_particles);
    if (frac < 0.005) {
        fmt::print(stderr, "warning: SNIS effective sample size {:.1f} of {} particles\n",
                   post.ess(), n_particles);
    }
    return post;
}

double gelbo(const GaussianApprox& q, const PriorSpec& prior, const Model& model, LossKind loss,
             double omega, const ExperimentHistory& hist, int n_mc, Rng& rng)
{
    if (n_mc < 1) {
        throw std::invalid_argument("gelbo: n_mc must be positive");
    }
    const std::size_t d = q.dist.dim();
    std::vector<double> u(d), theta(d);
    double total = 0.0;
    for (int k = 0; k < n_mc; ++k) {
        q.dist.sample_into(rng, u);
        to_theta(prior.log_space, u, theta);
        if (!admissible(model, prior, theta)) {
            continue;
        }
        double f = prior_logpdf_u(prior, u) - q.dist.logpdf(u);
        if (!hist.empty()) {
            f -= omega * history_loss(model, loss, hist, theta);
        }
        total += f;
    }
    return total / n_mc;
}

ElboGradient gelbo_gradient(std::span<const double> mean, std::span<const double> raw_scale,
                            const PriorSpec& prior, const Model& model, LossKind loss,
                            double omega, const ExperimentHistory& hist,
                            std::span<const double> noise, GradientMode mode, double fd_step)
{
    const SampleObjective obj{prior, model, loss, omega, hist};
    ElboGradient g;
    if (mode == GradientMode::Pathwise) {
        g.objective = obj(mean, raw_scale, noise, &g.d_mean, &g.d_raw_scale);
        return g;
    }
    const std::size_t d = mean.size();
    g.objective = obj(mean, raw_scale, noise, nullptr, nullptr);
    std::vector<double> m(mean.begin(), mean.end());
    std::vector<double> r(raw_scale.begin(), raw_scale.end());
    g.d_mean.resize(d);
    g.d_raw_scale.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double m0 = m[j];
        m[j] = m0 + fd_step;
        const double up = obj(m, r, noise, nullptr, nullptr);
        m[j] = m0 - fd_step;
        const double dn = obj(m, r, noise, nullptr, nullptr);
        m[j] = m0;
        g.d_mean[j] = (up - dn) / (2.0 * fd_step);

        const double r0 = r[j];
        r[j] = r0 + fd_step;
        const double up2 = obj(m, r, noise, nullptr, nullptr);
        r[j] = r0 - fd_step;
        const double dn2 = obj(m, r, noise, nullptr, nullptr);
        r[j] = r0;
        g.d_raw_scale[j] = (up2 - dn2) / (2.0 * fd_step);
    }
    return g;
}

GaussianApprox fit_variational(const PriorSpec& prior, const Model& model, LossKind loss,
                               double omega, const ExperimentHistory& hist,
                               const VariationalConfig& config, Rng& rng,
                               const std::optional<GaussianApprox>& init)
{
    if (!(omega > 0.0)) {
        throw std::invalid_argument("learning rate omega must be positive");
    }
    if (config.steps < 0 || config.n_mc < 1 || !(config.step_size > 0.0)) {
        throw std::invalid_argument("VariationalConfig: bad optimiser settings");
    }
    validate_history(hist);
    const std::size_t d = prior.dist.dim();
    const GaussianApprox& start = init ? *init : prior;
    if (start.dist.dim() != d) {
        throw std::invalid_argument("fit_variational: initial approximation has wrong dimension");
    }
    std::vector<double> params(2 * d);
    for (std::size_t j = 0; j < d; ++j) {
        params[j] = start.dist.mean()[j];
        params[d + j] = softplus_inv(start.dist.std()[j]);
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    std::vector<double> m1(2 * d, 0.0), m2(2 * d, 0.0), grad(2 * d);
    std::vector<double> noise(static_cast<std::size_t>(config.n_mc) * d);
    double b1t = 1.0;
    double b2t = 1.0;
    for (int step = 0; step < config.steps; ++step) {
        for (double& e : noise) {
            e = rng.normal();
        }
        const std::span<const double> mean(params.data(), d);
        const std::span<const double> raw(params.data() + d, d);
        const ElboGradient g = gelbo_gradient(mean, raw, prior, model, loss, omega, hist, noise,
                                              config.gradient, config.fd_step);
        std::copy(g.d_mean.begin(), g.d_mean.end(), grad.begin());
        std::copy(g.d_raw_scale.begin(), g.d_raw_scale.end(), grad.begin() + d);
        b1t *= beta1;
        b2t *= beta2;
        for (std::size_t j = 0; j < 2 * d; ++j) {
            m1[j] = beta1 * m1[j] + (1.0 - beta1) * grad[j];
            m2[j] = beta2 * m2[j] + (1.0 - beta2) * grad[j] * grad[j];
            const double mh = m1[j] / (1.0 - b1t);
            const double vh = m2[j] / (1.0 - b2t);
            params[j] += config.step_size * mh / (std::sqrt(vh) + eps);
        }
        for (std::size_t j = 0; j < 2 * d; ++j) {
            if (!std::isfinite(params[j])) {
                throw std::runtime_error(fmt::format(
                    "variational fit diverged at iteration {} (parameter {}, objective {})", step,
                    j, g.objective));
            }
        }
    }
    std::vector<double> mu(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
    std::vector<double> sd(d);
    for (std::size_t j = 0; j < d; ++j) {
        sd[j] = std::max(softplus(params[d + j]), 1e-300);
    }
    return GaussianApprox{DiagGaussian(std::move(mu), std::move(sd)), prior.log_space,
                          prior.ordered_rates};
}

PredictiveSummary predictive_summary(const Belief& belief, const Model& model,
                                     const std::vector<Design>& designs, std::size_t n, Rng& rng)
{
    if (n < 2) {
        throw std::invalid_argument("predictive_summary: need at least two draws per design");
    }
    PredictiveSummary out;
    out.designs = designs;
    if (designs.empty()) {
        return out;
    }
    auto streams = rng.split(designs.size());
    std::vector<double> theta(theta_dim(belief));
    for (std::size_t i = 0; i < designs.size(); ++i) {
        std::vector<double> ys(n);
        for (double& y : ys) {
            sample_theta(belief, streams[i], theta);
            y = model_simulate(model, theta, designs[i], streams[i]);
        }
        double mean = 0.0;
        for (double y : ys) {
            mean += y;
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double y : ys) {
            ss += (y - mean) * (y - mean);
        }
        out.mean.push_back(mean);
        out.std.push_back(std::sqrt(ss / static_cast<double>(n - 1)));
        out.samples.push_back(std::move(ys));
    }
    return out;
}

PredictiveCloud::PredictiveCloud(const Belief& belief, const Model& model, std::size_t n_samples,
                                 Rng& rng)
    : model_(model), dim_(theta_dim(belief))
{
    if (const auto* p = std::get_if<ParticlePosterior>(&belief)) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            if (p->weights[i] > 0.0) {
                const auto row = p->particle(i);
                thetas_.insert(thetas_.end(), row.begin(), row.end());
                weights_.push_back(p->weights[i]);
            }
        }
        return;
    }
    if (n_samples == 0) {
        throw std::invalid_argument("PredictiveCloud: need at least one draw");
    }
    thetas_.resize(n_samples * dim_);
    for (std::size_t i = 0; i < n_samples; ++i) {
        sample_theta(belief, rng, std::span<double>(thetas_.data() + i * dim_, dim_));
    }
    weights_.assign(n_samples, 1.0 / static_cast<double>(n_samples));
}

PredictiveMoments PredictiveCloud::operator()(std::span<const double> xi) const
{
    std::vector<Moments> ms(weights_.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        ms[i] = model_.moments(std::span<const double>(thetas_.data() + i * dim_, dim_), xi);
        mean += weights_[i] * ms[i].mean;
    }
    double var = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const double dm = ms[i].mean - mean;
        var += weights_[i] * (ms[i].std * ms[i].std + dm * dm);
    }
    return {mean, std::sqrt(var)};
}

LossContext make_loss_context(const Belief& belief, const Model& model, int index,
                              std::size_t n_samples, Rng& rng, double amplitude)
{
    auto cloud = std::make_shared<const PredictiveCloud>(belief, model, n_samples, rng);
    LossContext ctx;
    ctx.index = index;
    ctx.kernel_amplitude = amplitude;
    ctx.predictive = [cloud](std::span<const double> xi) { return (*cloud)(xi); };
    return ctx;
}

GaussianPosterior conjugate_lr_posterior(const DiagGaussian& prior, double sigma,
                                         const ExperimentHistory& hist)
{
    if (prior.dim() != 2 || !(sigma > 0.0)) {
        throw std::invalid_argument("conjugate_lr_posterior: needs a 2-d prior and sigma > 0");
    }
    Eigen::Matrix2d prec = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs;
    for (int j = 0; j < 2; ++j) {
        const double v = prior.std()[j] * prior.std()[j];
        prec(j, j) = 1.0 / v;
        rhs(j) = prior.mean()[j] / v;
    }
    const double s2 = sigma * sigma;
    for (const Observation& obs : hist) {
        const Eigen::Vector2d x(1.0, obs.xi.at(0));
        prec += x * x.transpose() / s2;
        rhs += x * obs.y / s2;
    }
    const Eigen::LLT<Eigen::Matrix2d> llt(prec);
    GaussianPosterior post;
    post.mean = llt.solve(rhs);
    post.cov = llt.solve(Eigen::Matrix2d::Identity());
    return post;
}

}  // namespace gboed
