#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gboed/eig.hpp"
#include "support.hpp"

using namespace gboed;

namespace {

// Gaussian location toy whose loss is a constant.
struct ConstantLossProblem {
    double k;
    std::size_t theta_dim() const { return 1; }
    void sample_theta(Rng& rng, std::span<double> out) const { out[0] = rng.normal(); }
    OuterDraw observe(std::span<const double> th, Rng& rng) const
    {
        const double y = th[0] + rng.normal();
        return {y, k, loglik(th, y)};
    }
    double loss(std::span<const double>, double) const { return k; }
    double loglik(std::span<const double> th, double y) const { return testing::gauss_logpdf(y, th[0], 1.0); }
};

// Outcome law independent of theta.
struct FlatModelProblem {
    std::size_t theta_dim() const { return 1; }
    void sample_theta(Rng& rng, std::span<double> out) const { out[0] = rng.normal(); }
    OuterDraw observe(std::span<const double> th, Rng& rng) const
    {
        const double y = 2.0 + rng.normal();
        return {y, -loglik(th, y), loglik(th, y)};
    }
    double loss(std::span<const double> th, double y) const { return -loglik(th, y); }
    double loglik(std::span<const double>, double y) const { return testing::gauss_logpdf(y, 2.0, 1.0); }
};

EigConfig cfg(std::size_t n, std::size_t m, double omega = 1.0)
{
    EigConfig c;
    c.outer = n;
    c.inner = m;
    c.omega = omega;
    return c;
}

LossContext context_at(const Model& m, const Belief& b, std::uint64_t seed)
{
    Rng rng(seed);
    return make_loss_context(b, m, 1, 500, rng);
}

// Discrete mutual information by direct summation.
double mutual_information(const DiscreteToy& t)
{
    const std::size_t ny = t.outcomes.size();
    std::vector<double> py(ny, 0.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
        for (std::size_t y = 0; y < ny; ++y) {
            py[y] += t.prior[k] * t.prob[k][y];
        }
    }
    double mi = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        for (std::size_t y = 0; y < ny; ++y) {
            if (t.prob[k][y] > 0.0) {
                mi += t.prior[k] * t.prob[k][y] * std::log(t.prob[k][y] / py[y]);
            }
        }
    }
    return mi;
}

DiscreteToy small_toy()
{
    DiscreteToy t;
    t.prior = {0.2, 0.5, 0.3};
    t.outcomes = {0, 1, 2, 3, 4};
    t.prob = {{0.5, 0.2, 0.1, 0.1, 0.1}, {0.1, 0.3, 0.3, 0.2, 0.1}, {0.05, 0.05, 0.1, 0.3, 0.5}};
    for (const auto& row : t.prob) {
        std::vector<double> l;
        for (double p : row) {
            l.push_back(-std::log(p));
        }
        t.loss.push_back(l);
    }
    return t;
}

}  // namespace

TEST_CASE("self-normalised weights sum to one")
{
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> terms(200, 1.0), log_w(200);
        for (double& w : log_w) {
            w = 50.0 * rng.normal();
        }
        const EigEstimate e = detail::weighted_estimate(terms, log_w, false);
        CHECK(std::abs(e.value - 1.0) < 1e-12);
        CHECK(e.ess >= 1.0);
        CHECK(e.ess <= 200.0 + 1e-9);
    }
    const std::vector<double> t{1.0, 2.0, 3.0, 6.0};
    const EigEstimate u = detail::weighted_estimate(t, {0.0, 0.0, 0.0, 0.0}, true);
    CHECK(u.value == 3.0);
    CHECK(u.ess == doctest::Approx(4.0));
}

TEST_CASE("negative log-likelihood at unit rate recovers the Bayesian estimator")
{
    Rng pick(3);
    const std::vector<Model> models{testing::lr(1.0), testing::pk(), testing::lf(2)};
    for (const Model& m : models) {
        const Belief prior = default_prior(m);
        const LossContext ctx;
        for (int i = 0; i < 20; ++i) {
            const Design xi = m.design_space().sample(pick);
            Rng a(50 + i), b(50 + i), c(50 + i);
            const auto g = gibbs_eig_nmc(m, prior, LossSpec{}, ctx, xi, cfg(300, 30), a);
            const auto bayes = beig_nmc(m, prior, xi, cfg(300, 30), b);
            const auto nw = gibbs_eig_noweight(m, prior, LossSpec{}, ctx, xi, cfg(300, 30), c);
            CHECK(std::abs(g.value - bayes.value) <= 1e-9);
            CHECK(nw.value == bayes.value);
        }
    }
}

TEST_CASE("a constant loss carries no information")
{
    const ConstantLossProblem p{2.7};
    for (Utility u : {Utility::Gibbs, Utility::GibbsNoWeight}) {
        Rng rng(5);
        CHECK(std::abs(nmc_eig(p, u, cfg(2000, 50, 0.6), rng).value) <= 1e-9);
    }
}

TEST_CASE("an outcome independent of theta carries no information")
{
    const FlatModelProblem p;
    Rng rng(7);
    const auto e = nmc_eig(p, Utility::Bayes, cfg(5000, 50), rng);
    CHECK(std::abs(e.value) <= 3.0 / std::sqrt(5000.0));
}

TEST_CASE("vanishing learning rate drives the Gibbs EIG to zero")
{
    Rng pick(11);
    const std::vector<Model> models{testing::lr(1.0), testing::pk(), testing::lf(2)};
    const LossSpec wsm{LossKind::WeightedSM, ExpDecaySchedule{9.0, 1.0, 0.04}};
    for (const Model& m : models) {
        const Belief prior = default_prior(m);
        const LossContext ctx = context_at(m, prior, 2);
        for (int i = 0; i < 10; ++i) {
            const Design xi = m.design_space().sample(pick);
            Rng rng(i);
            CHECK(std::abs(gibbs_eig_nmc(m, prior, wsm, ctx, xi, cfg(500, 50, 1e-8), rng).value) < 1e-5);
        }
    }
}

TEST_CASE("linear-gaussian BEIG against its closed form")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    const Design zero{0.0}, edge{4.0};
    Rng a(1), b(2);
    const double at_zero = beig_nmc(m, prior, zero, cfg(10000, 1000), a).value;
    const double at_edge = beig_nmc(m, prior, edge, cfg(10000, 1000), b).value;
    CHECK(std::abs(at_zero - 0.5 * std::log(2.0)) < 0.01);
    CHECK(std::abs(at_edge - 0.5 * std::log(18.0)) < 0.02);
}

TEST_CASE("BEIG grows with the design magnitude")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    double lo = 0.0, hi = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng a(s), b(s + 100);
        lo += beig_nmc(m, prior, Design{0.0}, cfg(1000, 100), a).value;
        hi += beig_nmc(m, prior, Design{4.0}, cfg(1000, 100), b).value;
    }
    CHECK(hi > lo);
}

TEST_CASE("dropping the importance weights changes the weighted estimate")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    const LossContext ctx = context_at(m, prior, 4);
    const LossSpec sharp{LossKind::WeightedSM, ExpDecaySchedule{0.1, 0.1, 0.04}};
    const Design xi{3.0};
    Rng a(9), b(9);
    const auto w = gibbs_eig_nmc(m, prior, sharp, ctx, xi, cfg(5000, 100), a);
    const auto nw = gibbs_eig_noweight(m, prior, sharp, ctx, xi, cfg(5000, 100), b);
    CHECK(std::abs(w.value - nw.value) > 2.0 * std::hypot(w.std_error, nw.std_error));
}

TEST_CASE("quadrature forms on a discrete toy")
{
    const DiscreteToy t = small_toy();
    const QuadratureEig q = eig_quadrature_oracle(t, 1.0);
    const double mi = mutual_information(t);
    CHECK(q.pseudo_joint == doctest::Approx(mi).epsilon(1e-12));
    CHECK(std::abs(q.expected_kl - q.pseudo_joint) < 1e-10);
    CHECK(std::abs(q.loss_form - q.pseudo_joint) < 1e-10);
    CHECK(std::abs(q.importance - q.pseudo_joint) < 1e-10);
    CHECK(q.total_mass == doctest::Approx(1.0).epsilon(1e-14));

    DiscreteToy flat = t;
    for (auto& row : flat.loss) {
        std::fill(row.begin(), row.end(), 1.3);
    }
    const QuadratureEig z = eig_quadrature_oracle(flat, 0.7);
    CHECK(std::abs(z.pseudo_joint) < 1e-12);
    CHECK(std::abs(z.importance) < 1e-12);
}

TEST_CASE("quadrature value is non-negative for score-matching toys")
{
    Rng rng(3);
    std::vector<double> outcomes;
    for (int i = 0; i <= 400; ++i) {
        outcomes.push_back(-10.0 + 0.05 * i);
    }
    for (int rep = 0; rep < 5; ++rep) {
        const std::vector<double> means{rng.normal(), rng.normal(), rng.normal()};
        for (LossKind k : {LossKind::NegLogLik, LossKind::UnweightedSM, LossKind::WeightedSM}) {
            const DiscreteToy t =
                make_gaussian_toy({0.3, 0.3, 0.4}, means, 1.0, outcomes, k, ImqParams{0.0, 1.5, 1.0});
            const QuadratureEig q = eig_quadrature_oracle(t, 0.5);
            CHECK(q.pseudo_joint >= 0.0);
            CHECK(std::abs(q.expected_kl - q.pseudo_joint) < 1e-10);
            CHECK(std::abs(q.loss_form - q.pseudo_joint) < 1e-10);
        }
    }
}

TEST_CASE("toy NMC converges to the quadrature value")
{
    std::vector<double> outcomes;
    for (int i = 0; i <= 160; ++i) {
        outcomes.push_back(-8.0 + 0.1 * i);
    }
    for (LossKind k : {LossKind::NegLogLik, LossKind::UnweightedSM}) {
        const DiscreteToy t = make_gaussian_toy({0.25, 0.25, 0.5}, {-1.0, 0.0, 1.5}, 1.0, outcomes, k);
        const double omega = k == LossKind::NegLogLik ? 1.0 : 0.3;
        const double target = eig_quadrature_oracle(t, omega).normalised();
        Rng rng(17);
        const auto e = toy_eig_nmc(t, Utility::Gibbs, cfg(20000, 20000, omega), rng);
        CHECK(std::abs(e.value - target) < 3.0 * e.std_error);
    }
}

TEST_CASE("a coarse outcome grid is rejected")
{
    CHECK_THROWS(make_gaussian_toy({0.5, 0.5}, {0.0, 1.0}, 1.0, {-1.0, 0.0, 1.0}, LossKind::NegLogLik));
}

TEST_CASE("eig surface streams follow the canonical design order")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    const LossContext ctx;
    const Design single{1.5};
    Rng direct_parent(21);
    Rng direct = direct_parent.split(1)[0];
    const auto one = eig_estimate(Utility::Bayes, m, prior, LossSpec{}, ctx, single, cfg(200, 20), direct);
    Rng srng(21);
    const auto surf = eig_surface(Utility::Bayes, m, prior, LossSpec{}, ctx, {single}, cfg(200, 20), srng);
    CHECK(surf[0].value == one.value);

    const std::vector<Design> designs{{-2.0}, {3.0}, {0.5}, {-4.0}};
    const std::vector<Design> permuted{{0.5}, {-4.0}, {3.0}, {-2.0}};
    Rng r1(5), r2(5);
    const auto a = eig_surface(Utility::Bayes, m, prior, LossSpec{}, ctx, designs, cfg(200, 20), r1);
    const auto b = eig_surface(Utility::Bayes, m, prior, LossSpec{}, ctx, permuted, cfg(200, 20), r2);
    CHECK(a[0].value == b[3].value);
    CHECK(a[1].value == b[2].value);
    CHECK(a[2].value == b[0].value);
    CHECK(a[3].value == b[1].value);
    CHECK(canonical_ranks(designs) == std::vector<std::size_t>{1, 3, 2, 0});
}

TEST_CASE("BEIG surface for regression peaks at the boundary")
{
    const Model m = testing::lr(1.0);
    const Belief prior = default_prior(m);
    std::vector<Design> grid;
    for (int i = 0; i < 100; ++i) {
        grid.push_back({-4.0 + 8.0 * i / 99.0});
    }
    Rng rng(1);
    const auto s = eig_surface(Utility::Bayes, m, prior, LossSpec{}, LossContext{}, grid, cfg(2000, 100), rng);
    const auto best = std::max_element(s.begin(), s.end(),
                                       [](const EigEstimate& x, const EigEstimate& y) { return x.value < y.value; });
    const double xi = grid[static_cast<std::size_t>(best - s.begin())][0];
    CHECK(std::abs(xi) > 3.5);
}

TEST_CASE("EIG configuration validation")
{
    CHECK_THROWS(validate(cfg(0, 10)));
    CHECK_THROWS(validate(cfg(10, 0)));
    CHECK_THROWS(validate(cfg(10, 10, 0.0)));
    CHECK_NOTHROW(validate(cfg(10, 10, 0.5)));
}
