#include "doctest.h"

#include <cmath>
#include <numbers>

#include "gboed/distributions.hpp"
#include "gboed/rng.hpp"
#include "support.hpp"

using namespace gboed;

TEST_CASE("scalar log densities")
{
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(logpdf(ScalarDist{Normal(0.0, 1.0)}, 0.0) == doctest::Approx(-half_log_2pi).epsilon(1e-15));
    CHECK(logpdf(ScalarDist{Normal(0.0, 1.0)}, 0.0) == doctest::Approx(-0.9189385).epsilon(1e-7));
    CHECK(logpdf(ScalarDist{Uniform(0.0, 2.0)}, 1.0) == doctest::Approx(std::log(0.5)));
    CHECK(std::isinf(logpdf(ScalarDist{Uniform(0.0, 2.0)}, 2.5)));
    CHECK(logpdf(ScalarDist{Laplace(1.5, 0.7)}, 1.5) == -std::log(2.0 * 0.7));
}

TEST_CASE("diagonal gaussian density is a sum of scalar densities")
{
    const DiagGaussian g({0.0, 0.0}, {1.0, 1.0});
    const std::vector<double> x{0.0, 0.0};
    CHECK(logpdf(g, x) == doctest::Approx(-1.8378771).epsilon(1e-7));
    const DiagGaussian h({1.0, -2.0}, {0.5, 3.0});
    const std::vector<double> z{0.3, 1.1};
    CHECK(logpdf(h, z) == doctest::Approx(testing::gauss_logpdf(0.3, 1.0, 0.5) +
                                          testing::gauss_logpdf(1.1, -2.0, 3.0)));
}

TEST_CASE("invalid parameters are rejected")
{
    CHECK_THROWS(Normal(1.0, 0.0));
    CHECK_THROWS(Normal(1.0, -1.0));
    CHECK_THROWS(Laplace(0.0, 0.0));
    CHECK_THROWS(Uniform(2.0, 2.0));
    CHECK_THROWS(DiagGaussian({0.0}, {0.0}));
    CHECK_THROWS(DiagGaussian({0.0, 1.0}, {1.0}));
}

TEST_CASE("uniform draws stay in [lo, hi)")
{
    Rng rng(11);
    const ScalarDist u = Uniform(3.0, 9.0);
    for (int i = 0; i < 100000; ++i) {
        const double v = sample(u, rng);
        REQUIRE(v >= 3.0);
        REQUIRE(v < 9.0);
    }
}

TEST_CASE("normal sample mean is within the CLT bound")
{
    Rng rng(3);
    const ScalarDist n = Normal(2.0, 1.0);
    std::vector<double> v(100000);
    for (double& x : v) {
        x = sample(n, rng);
    }
    CHECK(std::abs(testing::sample_mean(v) - 2.0) < 0.02);
    CHECK(testing::sample_var(v) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("laplace draws have excess kurtosis near 3")
{
    Rng rng(5);
    const ScalarDist l = Laplace(0.0, 1.0);
    std::vector<double> v(200000);
    for (double& x : v) {
        x = sample(l, rng);
    }
    const double m = testing::sample_mean(v);
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        m2 += (x - m) * (x - m);
        m4 += std::pow(x - m, 4);
    }
    m2 /= v.size();
    m4 /= v.size();
    CHECK(std::abs(m4 / (m2 * m2) - 3.0 - 3.0) < 0.5);
}

TEST_CASE("normal density integrates to one")
{
    const double mu = -1.3, sd = 0.7;
    const ScalarDist n = Normal(mu, sd);
    const int steps = 20000;
    const double lo = mu - 8 * sd, hi = mu + 8 * sd, h = (hi - lo) / steps;
    double acc = 0.5 * (std::exp(logpdf(n, lo)) + std::exp(logpdf(n, hi)));
    for (int i = 1; i < steps; ++i) {
        acc += std::exp(logpdf(n, lo + i * h));
    }
    CHECK(std::abs(acc * h - 1.0) < 1e-6);
}

TEST_CASE("split streams are deterministic and distinct")
{
    Rng a(7), b(7);
    auto sa = a.split(2);
    auto sb = b.split(2);
    for (int i = 0; i < 10; ++i) {
        CHECK(sa[0]() == sb[0]());
        CHECK(sa[1]() == sb[1]());
    }
    Rng c(7);
    auto sc = c.split(2);
    CHECK(sc[0]() != sc[1]());
    CHECK_THROWS(split(c, 0));
}

TEST_CASE("derive does not depend on parent consumption")
{
    Rng a(9);
    const auto before = a.derive({1, 2, 3})();
    for (int i = 0; i < 17; ++i) {
        a();
    }
    CHECK(a.derive({1, 2, 3})() == before);
    CHECK(a.derive({1, 2, 4})() != before);
    CHECK(a.derive({1, 2})() != before);
}

TEST_CASE("identical seeds give identical draws")
{
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.normal() == b.normal());
        REQUIRE(a.uniform01() == b.uniform01());
    }
}
