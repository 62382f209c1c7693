#include "doctest.h"

#include <cmath>

#include "gboed/inference.hpp"
#include "gboed/losses.hpp"
#include "support.hpp"

using namespace gboed;

namespace {

double imq_oracle(double y, const ImqParams& p)
{
    const double u = (y - p.gamma) / p.c;
    return p.amplitude / std::sqrt(1.0 + u * u);
}

// Score-matching losses rebuilt from finite differences of the log-density.
struct FdLosses {
    double unweighted;
    double weighted;
};

FdLosses fd_losses(const Model& m, const Theta& th, const Design& xi, double y, const ImqParams& p)
{
    auto logp = [&](double v) { return model_loglik(m, v, th, xi); };
    const double sd = m.moments(th, xi).std;
    const double h2 = 1e-2 * sd;  // log-density is quadratic in y
    auto score = [&](double v) { return (logp(v + h2) - logp(v - h2)) / (2 * h2); };
    const double s = score(y);
    const double ds = (logp(y + h2) - 2 * logp(y) + logp(y - h2)) / (h2 * h2);
    const double h = 1e-5 * std::max(sd, p.c);
    auto flux = [&](double v) {
        const double r = imq_oracle(v, p);
        return r * r * score(v);
    };
    const double r = imq_oracle(y, p);
    return {s * s + 2 * ds, r * r * s * s + 2 * (flux(y + h) - flux(y - h)) / (2 * h)};
}

}  // namespace

TEST_CASE("score-matching losses match finite-difference reconstructions")
{
    Rng rng(99);
    const std::vector<Model> models{testing::lr(1.2), testing::pk(), testing::lf(2)};
    int checked = 0;
    for (const Model& m : models) {
        for (int i = 0; i < 100; ++i) {
            const Theta th = testing::random_theta(m, rng);
            const Design xi = m.design_space().sample(rng);
            const Moments mo = m.moments(th, xi);
            const double y = mo.mean + mo.std * (6.0 * rng.uniform01() - 3.0);
            ImqParams p;
            p.gamma = mo.mean + mo.std * (4.0 * rng.uniform01() - 2.0);
            p.c = mo.std * (0.2 + 5.0 * rng.uniform01());
            p.amplitude = 0.5 + rng.uniform01();
            const FdLosses fd = fd_losses(m, th, xi, y, p);
            const double u = loss_from_moments(LossKind::UnweightedSM, y, mo, p);
            const double w = loss_from_moments(LossKind::WeightedSM, y, mo, p);
            const double scale = 1.0 / (mo.std * mo.std);
            CHECK(std::abs(u - fd.unweighted) <= 1e-5 * std::max(std::abs(u), scale));
            CHECK(std::abs(w - fd.weighted) <= 1e-5 * std::max(std::abs(w), scale * p.amplitude * p.amplitude));
            ++checked;
        }
    }
    CHECK(checked == 300);
}

TEST_CASE("IMQ weight")
{
    const ImqParams p{1.5, 2.0, 1.0};
    const ImqWeight at_centre = imq_weight(1.5, p);
    CHECK(at_centre.r == 1.0);
    CHECK(at_centre.dr_dy == 0.0);
    CHECK(imq_weight(3.5, p).r == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(imq_weight(1.5, ImqParams{1.5, 2.0, 0.3}).r == doctest::Approx(0.3));

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const ImqParams q{10.0 * rng.uniform01() - 5.0, 0.1 + 10.0 * rng.uniform01(), 0.5 + rng.uniform01()};
        double y = q.gamma + q.c * (6.0 * rng.uniform01() - 3.0);
        if (std::abs(y - q.gamma) < 0.05 * q.c) {
            y += 0.1 * q.c;
        }
        const double h = 1e-5 * q.c;
        const double fd = (imq_oracle(y + h, q) - imq_oracle(y - h, q)) / (2 * h);
        CHECK(imq_weight(y, q).r == doctest::Approx(imq_oracle(y, q)).epsilon(1e-14));
        CHECK(imq_weight(y, q).dr_dy == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("weighted loss tends to the unweighted loss for a flat kernel")
{
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const Moments mo{10.0 * rng.uniform01() - 5.0, 0.2 + 3.0 * rng.uniform01()};
        const double y = mo.mean + mo.std * (6.0 * rng.uniform01() - 3.0);
        const double a = 0.5 + rng.uniform01();
        const ImqParams flat{mo.mean + 1.0, 1e9, a};
        const double u = loss_from_moments(LossKind::UnweightedSM, y, mo, flat);
        const double w = loss_from_moments(LossKind::WeightedSM, y, mo, flat);
        CHECK(w == doctest::Approx(u * a * a).epsilon(1e-6));
    }
}

TEST_CASE("closed-form loss values")
{
    const Moments std_normal{0.0, 1.0};
    CHECK(loss_from_moments(LossKind::NegLogLik, 0.0, std_normal, {}) ==
          doctest::Approx(0.9189385).epsilon(1e-7));
    const Moments m{2.0, 0.5};
    CHECK(loss_from_moments(LossKind::UnweightedSM, 2.0, m, {}) == doctest::Approx(-2.0 / 0.25));
    // (y - mu)^2 / s^4 - 2 / s^2
    CHECK(loss_from_moments(LossKind::UnweightedSM, 2.5, m, {}) ==
          doctest::Approx(0.25 / 0.0625 - 8.0));
}

TEST_CASE("negative log-likelihood at unit learning rate is the Bayesian update")
{
    Rng rng(1);
    const Model m = testing::pk();
    const LossSpec nll{LossKind::NegLogLik, LaplanteSchedule{}};
    for (int i = 0; i < 50; ++i) {
        const Theta th = testing::random_theta(m, rng);
        const Design xi = m.design_space().sample(rng);
        const double y = model_simulate(m, th, xi, rng);
        CHECK(-loss_eval(nll, th, xi, y, LossContext{}, m) == model_loglik(m, y, th, xi));
    }
}

TEST_CASE("unweighted score matching is minimised at mu = y")
{
    const double y = 1.37, sd = 0.8;
    double best = 1e300, arg = 0.0;
    for (int i = -2000; i <= 2000; ++i) {
        const double mu = y + i * 1e-3;
        const double l = loss_from_moments(LossKind::UnweightedSM, y, Moments{mu, sd}, {});
        if (l < best) {
            best = l;
            arg = mu;
        }
    }
    CHECK(arg == doctest::Approx(y).epsilon(1e-12));
}

TEST_CASE("weighted loss is continuous in y")
{
    const Moments mo{0.5, 1.3};
    const ImqParams p{-0.4, 0.9, 1.0};
    const double h = 1e-4;
    double prev = loss_from_moments(LossKind::WeightedSM, -15.0, mo, p);
    double worst = 0.0;
    for (double y = -15.0 + h; y <= 15.0; y += h) {
        const double cur = loss_from_moments(LossKind::WeightedSM, y, mo, p);
        worst = std::max(worst, std::abs(cur - prev));
        prev = cur;
    }
    // bounded derivative times the step
    CHECK(worst < 10.0 * h);
}

TEST_CASE("loss partials match finite differences")
{
    Rng rng(12);
    for (LossKind k : {LossKind::NegLogLik, LossKind::UnweightedSM, LossKind::WeightedSM}) {
        for (int i = 0; i < 50; ++i) {
            const Moments mo{4.0 * rng.uniform01() - 2.0, 0.3 + 2.0 * rng.uniform01()};
            const double y = mo.mean + mo.std * (4.0 * rng.uniform01() - 2.0);
            const ImqParams p{rng.uniform01(), 0.5 + rng.uniform01(), 1.0};
            const LossPartials lp = loss_partials(k, y, mo, p);
            const double h = 1e-6;
            const double dm = (loss_from_moments(k, y, {mo.mean + h, mo.std}, p) -
                               loss_from_moments(k, y, {mo.mean - h, mo.std}, p)) / (2 * h);
            const double ds = (loss_from_moments(k, y, {mo.mean, mo.std + h}, p) -
                               loss_from_moments(k, y, {mo.mean, mo.std - h}, p)) / (2 * h);
            CHECK(lp.value == doctest::Approx(loss_from_moments(k, y, mo, p)).epsilon(1e-13));
            CHECK(lp.d_mean == doctest::Approx(dm).epsilon(1e-5).scale(1.0));
            CHECK(lp.d_std == doctest::Approx(ds).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("exponential decay schedule")
{
    CHECK(exp_decay_c(1, 9.0, 1.0, 0.04) == 10.0);
    CHECK(exp_decay_c(26, 9.0, 1.0, 0.04) == doctest::Approx(9.0 * std::exp(-1.0) + 1.0));
    CHECK(std::abs(exp_decay_c(26, 9.0, 1.0, 0.04) - 4.3109) < 1e-4);
    CHECK(exp_decay_c(100000, 9.0, 1.0, 0.04) == doctest::Approx(1.0));
    CHECK_THROWS(exp_decay_c(0, 9.0, 1.0, 0.04));
}

TEST_CASE("laplante parameters")
{
    const auto [g, c] = laplante_params(PredictiveMoments{3.0, 2.0});
    CHECK(g == 3.0);
    CHECK(c == 2.0);
    CHECK_THROWS(laplante_params(PredictiveMoments{3.0, 0.0}));
}

TEST_CASE("laplante context under the prior matches the prior predictive")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    Rng rng(3);
    const LossContext ctx = make_loss_context(prior, m, 1, 40000, rng);
    const LossSpec spec{LossKind::WeightedSM, LaplanteSchedule{}};
    for (double xi : {-4.0, -1.0, 0.0, 2.0}) {
        const Design d{xi};
        const ImqParams p = resolve_imq(spec, ctx, d);
        // features (1, xi) under N(0, I) plus unit noise
        const double sd = std::sqrt(1.0 + xi * xi + 1.0);
        CHECK(std::abs(p.gamma) < 4.0 * std::sqrt(1.0 + xi * xi) / std::sqrt(40000.0));
        CHECK(p.c == doctest::Approx(sd).epsilon(0.02));
        CHECK(p.c > 0.0);
    }
}

TEST_CASE("exp-decay context ignores the predictive")
{
    const LossSpec spec{LossKind::WeightedSM, ExpDecaySchedule{9.0, 1.0, 0.04}};
    LossContext ctx;
    ctx.index = 3;
    ctx.predictive = [](std::span<const double>) { return PredictiveMoments{7.0, 1.0}; };
    const Design d{0.0};
    const ImqParams p = resolve_imq(spec, ctx, d);
    CHECK(p.gamma == 7.0);
    CHECK(p.c == doctest::Approx(9.0 * std::exp(-0.08) + 1.0));
    LossContext empty;
    CHECK_THROWS(resolve_imq(spec, empty, d));
}
