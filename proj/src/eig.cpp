#include "gboed/eig.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <fmt/core.h>

namespace gboed {

void validate(const EigConfig& cfg)
{
    if (cfg.outer < 1 || cfg.inner < 1) {
        throw std::invalid_argument("EigConfig: outer and inner sample counts must be >= 1");
    }
    if (!(cfg.omega > 0.0) || !std::isfinite(cfg.omega)) {
        throw std::invalid_argument("EigConfig: omega must be positive and finite");
    }
}

namespace detail {

EigEstimate weighted_estimate(const std::vector<double>& terms, const std::vector<double>& log_w,
                              bool uniform)
{
    const std::size_t n = terms.size();
    if (!uniform && std::isfinite(log_w.front()) &&
        std::all_of(log_w.begin(), log_w.end(), [&](double v) { return v == log_w.front(); })) {
        uniform = true;
    }
    EigEstimate est;
    if (uniform) {
        const double z = 1.0 / static_cast<double>(n);
        double value = 0.0;
        for (double t : terms) {
            value += t * z;
        }
        double ss = 0.0;
        for (double t : terms) {
            ss += (t - value) * (t - value);
        }
        est.value = value;
        est.ess = static_cast<double>(n);
        est.spread = 0.0;
        est.std_error = std::sqrt(ss) * z;
    } else {
        const double lse = log_sum_exp(log_w);
        if (!std::isfinite(lse)) {
            throw std::runtime_error("EIG importance weights are all zero");
        }
        std::vector<double> z(n);
        double zsum = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = std::exp(log_w[i] - lse);
            zsum += z[i];
            if (std::isfinite(log_w[i])) {
                lo = std::min(lo, log_w[i]);
                hi = std::max(hi, log_w[i]);
            }
        }
        double value = 0.0;
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] /= zsum;
            if (z[i] > 0.0) {
                value += terms[i] * z[i];
            }
            sq += z[i] * z[i];
        }
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (z[i] > 0.0) {
                const double dt = terms[i] - value;
                var += z[i] * z[i] * dt * dt;
            }
        }
        est.value = value;
        est.ess = 1.0 / sq;
        est.spread = hi - lo;
        est.std_error = std::sqrt(var);
    }
    if (!std::isfinite(est.value)) {
        throw std::runtime_error("EIG estimate is not finite");
    }
    return est;
}

}  // namespace detail

ModelProblem::ModelProblem(const Model& model, const Belief& belief, const LossSpec& loss,
                           const LossContext& ctx, std::span<const double> xi)
    : model_(model), belief_(belief), kind_(loss.kind), imq_(resolve_imq(loss, ctx, xi)),
      xi_(xi.begin(), xi.end())
{
    if (gboed::theta_dim(belief) != model.theta_dim() || xi.size() != model.design_dim()) {
        throw std::invalid_argument("ModelProblem: prior or design dimension mismatch");
    }
}

OuterDraw ModelProblem::observe(std::span<const double> theta, Rng& rng) const
{
    const Moments m = model_.moments(theta, xi_);
    const double y = simulate_outcome(m, rng);
    return {y, loss_from_moments(kind_, y, m, imq_), normal_logpdf(y, m.mean, m.std)};
}

double ModelProblem::loss(std::span<const double> theta, double y) const
{
    return loss_from_moments(kind_, y, model_.moments(theta, xi_), imq_);
}

double ModelProblem::loglik(std::span<const double> theta, double y) const
{
    const Moments m = model_.moments(theta, xi_);
    return normal_logpdf(y, m.mean, m.std);
}

EigEstimate eig_estimate(Utility utility, const Model& model, const Belief& prior,
                         const LossSpec& loss, const LossContext& ctx,
                         std::span<const double> xi, const EigConfig& cfg, Rng& rng)
{
    const LossSpec spec = utility == Utility::Bayes ? LossSpec{} : loss;
    const ModelProblem problem(model, prior, spec, ctx, xi);
    return nmc_eig(problem, utility, cfg, rng);
}

EigEstimate gibbs_eig_nmc(const Model& model, const Belief& prior, const LossSpec& loss,
                          const LossContext& ctx, std::span<const double> xi,
                          const EigConfig& cfg, Rng& rng)
{
    return eig_estimate(Utility::Gibbs, model, prior, loss, ctx, xi, cfg, rng);
}

EigEstimate beig_nmc(const Model& model, const Belief& prior, std::span<const double> xi,
                     const EigConfig& cfg, Rng& rng)
{
    return eig_estimate(Utility::Bayes, model, prior, LossSpec{}, LossContext{}, xi, cfg, rng);
}

EigEstimate gibbs_eig_noweight(const Model& model, const Belief& prior, const LossSpec& loss,
                               const LossContext& ctx, std::span<const double> xi,
                               const EigConfig& cfg, Rng& rng)
{
    return eig_estimate(Utility::GibbsNoWeight, model, prior, loss, ctx, xi, cfg, rng);
}

std::vector<std::size_t> canonical_ranks(const std::vector<Design>& designs)
{
    std::vector<std::size_t> order(designs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return designs[a] < designs[b]; });
    std::vector<std::size_t> rank(designs.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[order[r]] = r;
    }
    return rank;
}

std::vector<EigEstimate> eig_surface(Utility utility, const Model& model, const Belief& prior,
                                     const LossSpec& loss, const LossContext& ctx,
                                     const std::vector<Design>& designs, const EigConfig& cfg,
                                     Rng& rng)
{
    if (designs.empty()) {
        throw std::invalid_argument("eig_surface: empty design list");
    }
    const auto rank = canonical_ranks(designs);
    auto streams = rng.split(designs.size());
    std::vector<EigEstimate> out;
    out.reserve(designs.size());
    for (std::size_t i = 0; i < designs.size(); ++i) {
        out.push_back(eig_estimate(utility, model, prior, loss, ctx, designs[i], cfg,
                                   streams[rank[i]]));
    }
    return out;
}

void DiscreteToy::validate() const
{
    const std::size_t k = prior.size();
    if (k == 0 || outcomes.empty() || prob.size() != k || loss.size() != k) {
        throw std::invalid_argument("DiscreteToy: inconsistent table shapes");
    }
    if (!std::is_sorted(outcomes.begin(), outcomes.end()) ||
        std::adjacent_find(outcomes.begin(), outcomes.end()) != outcomes.end()) {
        throw std::invalid_argument("DiscreteToy: outcomes must be strictly increasing");
    }
    double mass = 0.0;
    for (double p : prior) {
        if (!(p >= 0.0)) {
            throw std::invalid_argument("DiscreteToy: negative prior mass");
        }
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9) {
        throw std::invalid_argument("DiscreteToy: prior does not sum to 1");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (prob[i].size() != outcomes.size() || loss[i].size() != outcomes.size()) {
            throw std::invalid_argument("DiscreteToy: inconsistent table shapes");
        }
        const double row = std::accumulate(prob[i].begin(), prob[i].end(), 0.0);
        if (std::abs(row - 1.0) > 1e-6) {
            throw std::invalid_argument(fmt::format(
                "DiscreteToy: outcome grid too coarse, row {} sums to {:.9f}", i, row));
        }
    }
}

DiscreteToy make_gaussian_toy(std::vector<double> prior, const std::vector<double>& means,
                              double sigma, std::vector<double> outcomes, LossKind kind,
                              const ImqParams& imq)
{
    if (outcomes.size() < 2 || means.size() != prior.size() || !(sigma > 0.0)) {
        throw std::invalid_argument("make_gaussian_toy: bad arguments");
    }
    const double dy = outcomes[1] - outcomes[0];
    DiscreteToy toy;
    toy.prior = std::move(prior);
    toy.outcomes = std::move(outcomes);
    for (double mu : means) {
        std::vector<double> p, l;
        for (double y : toy.outcomes) {
            const double lp = normal_logpdf(y, mu, sigma) + std::log(dy);
            p.push_back(std::exp(lp));
            l.push_back(kind == LossKind::NegLogLik ? -lp
                                                    : loss_from_moments(kind, y, {mu, sigma}, imq));
        }
        toy.prob.push_back(std::move(p));
        toy.loss.push_back(std::move(l));
    }
    toy.validate();
    return toy;
}

QuadratureEig eig_quadrature_oracle(const DiscreteToy& toy, double omega)
{
    toy.validate();
    if (!(omega > 0.0)) {
        throw std::invalid_argument("eig_quadrature_oracle: omega must be positive");
    }
    const std::size_t k_n = toy.size();
    const std::size_t y_n = toy.outcomes.size();
    // g[k][y] = prior_k exp(-omega loss)
    std::vector<std::vector<double>> g(k_n, std::vector<double>(y_n));
    std::vector<double> marginal(y_n, 0.0);
    for (std::size_t k = 0; k < k_n; ++k) {
        for (std::size_t y = 0; y < y_n; ++y) {
            g[k][y] = toy.prior[k] * std::exp(-omega * toy.loss[k][y]);
            marginal[y] += g[k][y];
        }
    }
    QuadratureEig q{0.0, 0.0, 0.0, 0.0, 0.0};
    for (std::size_t y = 0; y < y_n; ++y) {
        q.total_mass += marginal[y];
        if (marginal[y] == 0.0) {
            continue;
        }
        double kl = 0.0;
        for (std::size_t k = 0; k < k_n; ++k) {
            if (g[k][y] == 0.0) {
                continue;
            }
            const double post = g[k][y] / marginal[y];
            const double joint = post * marginal[y];
            q.pseudo_joint += joint * std::log(joint / (toy.prior[k] * marginal[y]));
            kl += post * std::log(post / toy.prior[k]);
            q.loss_form += g[k][y] * (-omega * toy.loss[k][y] - std::log(marginal[y]));
        }
        q.expected_kl += marginal[y] * kl;
    }
    for (std::size_t k = 0; k < k_n; ++k) {
        double inner = 0.0;
        for (std::size_t y = 0; y < y_n; ++y) {
            const double gl = std::exp(-omega * toy.loss[k][y]);
            if (toy.prior[k] == 0.0 || gl == 0.0) {
                continue;
            }
            const double p = toy.prob[k][y];
            if (p == 0.0) {
                throw std::invalid_argument(
                    "eig_quadrature_oracle: model gives zero probability where the loss does not");
            }
            inner += p * (-omega * toy.loss[k][y] - std::log(marginal[y])) * (gl / p);
        }
        q.importance += toy.prior[k] * inner;
    }
    return q;
}

ToyProblem::ToyProblem(const DiscreteToy& toy) : toy_(&toy)
{
    toy.validate();
    prior_cdf_.resize(toy.size());
    std::partial_sum(toy.prior.begin(), toy.prior.end(), prior_cdf_.begin());
    for (const auto& row : toy.prob) {
        std::vector<double> cdf(row.size());
        std::partial_sum(row.begin(), row.end(), cdf.begin());
        prob_cdf_.push_back(std::move(cdf));
    }
}

namespace {

std::size_t draw_index(const std::vector<double>& cdf, double u)
{
    const double scaled = u * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), scaled);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

void ToyProblem::sample_theta(Rng& rng, std::span<double> out) const
{
    out[0] = static_cast<double>(draw_index(prior_cdf_, rng.uniform01()));
}

std::size_t ToyProblem::outcome_index(double y) const
{
    const auto& ys = toy_->outcomes;
    const auto it = std::lower_bound(ys.begin(), ys.end(), y);
    if (it == ys.end() || *it != y) {
        throw std::invalid_argument("ToyProblem: outcome not on the grid");
    }
    return static_cast<std::size_t>(it - ys.begin());
}

OuterDraw ToyProblem::observe(std::span<const double> theta, Rng& rng) const
{
    const auto k = static_cast<std::size_t>(theta[0]);
    const std::size_t j = draw_index(prob_cdf_[k], rng.uniform01());
    return {toy_->outcomes[j], toy_->loss[k][j], std::log(toy_->prob[k][j])};
}

double ToyProblem::loss(std::span<const double> theta, double y) const
{
    return toy_->loss[static_cast<std::size_t>(theta[0])][outcome_index(y)];
}

double ToyProblem::loglik(std::span<const double> theta, double y) const
{
    return std::log(toy_->prob[static_cast<std::size_t>(theta[0])][outcome_index(y)]);
}

std::vector<std::size_t> ToyProblem::multinomial(std::size_t m, Rng& rng) const
{
    std::vector<std::size_t> counts(toy_->size(), 0);
    std::size_t left = m;
    double mass_left = 1.0;
    for (std::size_t k = 0; k < counts.size() && left > 0; ++k) {
        const double p = toy_->prior[k];
        if (k + 1 == counts.size() || p >= mass_left) {
            counts[k] = left;
            break;
        }
        std::binomial_distribution<std::size_t> bin(left, std::clamp(p / mass_left, 0.0, 1.0));
        counts[k] = bin(rng);
        left -= counts[k];
        mass_left -= p;
    }
    return counts;
}

EigEstimate toy_eig_nmc(const DiscreteToy& toy, Utility utility, const EigConfig& cfg, Rng& rng)
{
    const ToyProblem problem(toy);
    return nmc_eig(problem, utility, cfg, rng);
}

}  // namespace gboed
