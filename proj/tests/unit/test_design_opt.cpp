#include "doctest.h"

#include <cmath>

#include "gboed/design_opt.hpp"
#include "support.hpp"

using namespace gboed;

namespace {

EigBatchFn from_function(double (*f)(double), const DesignSpace* space = nullptr,
                         std::size_t* calls = nullptr)
{
    return [=](const std::vector<Design>& xs) {
        std::vector<EigEstimate> out;
        for (const Design& x : xs) {
            if (space != nullptr) {
                REQUIRE(space->contains(x));
            }
            if (calls != nullptr) {
                ++*calls;
            }
            EigEstimate e;
            e.value = f(x[0]);
            out.push_back(e);
        }
        return out;
    };
}

double quadratic(double x) { return -(x - 1.0) * (x - 1.0); }
double wavy(double x) { return std::sin(3.0 * x) + 0.1 * x; }

}  // namespace

TEST_CASE("matern 5/2 kernel values")
{
    const std::vector<double> a{0.3, -1.0}, b{0.3, -1.0};
    CHECK(matern52(a, b, 2.0, 3.5) == 3.5);
    const std::vector<double> x{0.0}, y{1.7};
    const double s5 = std::sqrt(5.0);
    CHECK(matern52(x, y, 1.7, 1.0) == doctest::Approx((1.0 + s5 + 5.0 / 3.0) * std::exp(-s5)));
    CHECK(std::abs(matern52(x, y, 1.7, 1.0) - 0.52399) < 1e-5);
    const std::vector<double> p{0.2, 1.1}, q{-0.7, 2.5};
    CHECK(matern52(p, q, 0.8, 2.0) == matern52(q, p, 0.8, 2.0));
}

TEST_CASE("gaussian process interpolation")
{
    const KernelParams k{1.0, 2.0};
    const std::vector<Design> pts{{-1.0}, {0.5}, {2.0}};
    const std::vector<double> vals{1.0, -0.5, 3.0};
    const GpState gp = gp_fit(pts, vals, k);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto [m, v] = gp_predict(gp, pts[i]);
        CHECK(std::abs(m - vals[i]) < 1e-4);
        CHECK(v <= 10.0 * gp.jitter * k.variance);
    }
    GpState empty;
    empty.kernel = k;
    const auto [m0, v0] = gp_predict(empty, Design{0.3});
    CHECK(m0 == 0.0);
    CHECK(v0 == 2.0);

    const GpState sym = gp_fit({{-1.0}, {1.0}}, {-1.0, 1.0}, k);
    CHECK(std::abs(gp_predict(sym, Design{0.0}).first) < 1e-8);
}

TEST_CASE("batch prediction matches pointwise prediction")
{
    Rng rng(2);
    std::vector<Design> pts, cand;
    std::vector<double> vals;
    for (int i = 0; i < 15; ++i) {
        pts.push_back({8.0 * rng.uniform01() - 4.0, 8.0 * rng.uniform01() - 4.0});
        vals.push_back(rng.normal());
    }
    for (int i = 0; i < 40; ++i) {
        cand.push_back({8.0 * rng.uniform01() - 4.0, 8.0 * rng.uniform01() - 4.0});
    }
    const GpState gp = gp_fit(pts, vals, KernelParams{1.5, 1.0});
    std::vector<double> mean, var;
    gp_predict_batch(gp, cand, mean, var);
    for (std::size_t i = 0; i < cand.size(); ++i) {
        const auto [m, v] = gp_predict(gp, cand[i]);
        CHECK(mean[i] == doctest::Approx(m).epsilon(1e-10).scale(1.0));
        CHECK(var[i] == doctest::Approx(v).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("duplicate inputs do not break the factorisation")
{
    const GpState gp = gp_fit({{0.0}, {0.0}, {1.0}}, {1.0, 2.0, 3.0}, KernelParams{1.0, 1.0});
    CHECK(gp.size() == 2);
    CHECK(std::abs(gp_predict(gp, Design{0.0}).first - 1.0) < 1e-4);
}

TEST_CASE("UCB score is monotone in lambda")
{
    Rng rng(6);
    std::vector<Design> pts, cand;
    std::vector<double> vals;
    for (int i = 0; i < 8; ++i) {
        pts.push_back({8.0 * rng.uniform01() - 4.0});
        vals.push_back(rng.normal());
    }
    for (int i = 0; i < 100; ++i) {
        cand.push_back({8.0 * rng.uniform01() - 4.0});
    }
    const GpState gp = gp_fit(pts, vals, KernelParams{1.0, 1.0});
    std::vector<double> prev = ucb_scores(gp, cand, 0.0);
    for (double lambda : {0.5, 2.0, 6.0, 12.0}) {
        const auto cur = ucb_scores(gp, cand, lambda);
        for (std::size_t i = 0; i < cand.size(); ++i) {
            REQUIRE(cur[i] >= prev[i]);
        }
        prev = cur;
    }
}

TEST_CASE("design grids")
{
    const auto g = design_grid(testing::lr().design_space(), 100);
    REQUIRE(g.size() == 100);
    CHECK(g.front()[0] == -4.0);
    CHECK(g.back()[0] == 4.0);
    const auto g2 = design_grid(testing::lf(2).design_space(), 5);
    REQUIRE(g2.size() == 25);
    CHECK(g2[1] == Design{-4.0, -2.0});
    CHECK(g2[5] == Design{-2.0, -4.0});
}

TEST_CASE("grid acquisition equals a brute-force scan")
{
    const DesignSpace space = testing::lr().design_space();
    Rng rng(1);
    const Selection s = select_design(GridAcquisition{100}, from_function(wavy), space, rng);
    const auto grid = design_grid(space, 100);
    double best = -1e300;
    Design arg;
    for (const Design& d : grid) {
        if (wavy(d[0]) > best) {
            best = wavy(d[0]);
            arg = d;
        }
    }
    CHECK(s.xi == arg);
    CHECK(s.eig == best);
    CHECK(s.evaluations == 100);
}

TEST_CASE("random acquisition ignores the utility")
{
    const DesignSpace space = testing::pk().design_space();
    std::size_t calls = 0;
    Rng a(4), b(4);
    const Selection x = select_design(RandomAcquisition{}, from_function(quadratic, nullptr, &calls), space, a);
    const Selection y = select_design(RandomAcquisition{}, from_function(wavy, nullptr, &calls), space, b);
    CHECK(x.xi == y.xi);
    CHECK(calls == 0);
    CHECK(std::isnan(x.eig));
    CHECK(space.contains(x.xi));
}

TEST_CASE("bayesian optimisation finds the quadratic maximum")
{
    const DesignSpace space = testing::lr().design_space();
    BayesOptAcquisition bo;
    bo.lengthscale = 1.0;
    bo.variance = 1.0;
    bo.ucb_lambda = 6.0;
    bo.n_evaluations = 30;
    bo.candidate_pool_size = 200;
    int hits = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(s);
        std::size_t calls = 0;
        const Selection sel = select_design(bo, from_function(quadratic, &space, &calls), space, rng);
        hits += std::abs(sel.xi[0] - 1.0) <= 0.25;
        CHECK(calls == 30);
        CHECK(sel.evaluations == 30);
    }
    CHECK(hits >= 9);
}

TEST_CASE("bayesian optimisation stays inside a multi-dimensional space")
{
    const DesignSpace space = testing::lf(3).design_space();
    BayesOptAcquisition bo;
    bo.n_evaluations = 20;
    bo.candidate_pool_size = 100;
    const EigBatchFn f = [&](const std::vector<Design>& xs) {
        std::vector<EigEstimate> out;
        for (const Design& x : xs) {
            REQUIRE(space.contains(x));
            EigEstimate e;
            e.value = -(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            out.push_back(e);
        }
        return out;
    };
    Rng rng(3);
    const Selection sel = select_design(bo, f, space, rng);
    CHECK(space.contains(sel.xi));
}

TEST_CASE("acquisition validation")
{
    CHECK_THROWS(validate(AcquisitionSpec{GridAcquisition{0}}));
    BayesOptAcquisition bo;
    bo.lengthscale = 0.0;
    CHECK_THROWS(validate(AcquisitionSpec{bo}));
    CHECK_NOTHROW(validate(AcquisitionSpec{RandomAcquisition{}}));
    const auto pk = std::get<BayesOptAcquisition>(default_acquisition(testing::pk()));
    CHECK(pk.lengthscale == 20.0);
    CHECK(pk.variance == 10.0);
    CHECK(pk.ucb_lambda == 6.0);
    const auto lf = std::get<BayesOptAcquisition>(default_acquisition(testing::lf(2)));
    CHECK(lf.lengthscale == 15.0);
    CHECK(lf.variance == 4.0);
    CHECK(lf.ucb_lambda == 12.0);
    CHECK(std::get<GridAcquisition>(default_acquisition(testing::lr())).n_points == 100);
}
