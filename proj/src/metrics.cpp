#include "gboed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gboed/numeric.hpp"

namespace gboed {

namespace {

void check_shapes(const SampleTable& a, const SampleTable& b)
{
    if (a.empty() || a.size() != b.size()) {
        throw std::invalid_argument("metric: design counts differ or are zero");
    }
    for (std::size_t d = 0; d < a.size(); ++d) {
        if (a[d].empty() || a[d].size() != b[d].size()) {
            throw std::invalid_argument("metric: sample counts differ between tables");
        }
    }
}

double rmse_one(std::span<const double> p, std::span<const double> r)
{
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - r[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(p.size()));
}

double nll_one(std::span<const double> ref, const std::vector<Theta>& thetas, const Model& model,
               std::span<const double> xi)
{
    std::vector<Moments> ms;
    ms.reserve(thetas.size());
    for (const Theta& th : thetas) {
        ms.push_back(model.moments(th, xi));
    }
    const double log_m = std::log(static_cast<double>(thetas.size()));
    std::vector<double> lp(thetas.size());
    double total = 0.0;
    for (double y : ref) {
        for (std::size_t j = 0; j < ms.size(); ++j) {
            lp[j] = normal_logpdf(y, ms[j].mean, ms[j].std);
        }
        total += log_sum_exp(lp) - log_m;
    }
    return -total / static_cast<double>(ref.size());
}

}  // namespace

double rmse_metric(const SampleTable& pred, const SampleTable& ref)
{
    check_shapes(pred, ref);
    double acc = 0.0;
    for (std::size_t d = 0; d < pred.size(); ++d) {
        acc += rmse_one(pred[d], ref[d]);
    }
    return acc / static_cast<double>(pred.size());
}

double median_heuristic_bandwidth(std::span<const double> points)
{
    const std::size_t n = points.size();
    if (n < 2) {
        throw std::invalid_argument("median_heuristic_bandwidth: need at least two points");
    }
    std::vector<double> d2;
    d2.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = points[i] - points[j];
            d2.push_back(d * d);
        }
    }
    const std::size_t mid = d2.size() / 2;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
    double h = d2[mid];
    if (d2.size() % 2 == 0) {
        const double lower = *std::max_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid));
        h = 0.5 * (lower + h);
    }
    if (!(h > 0.0)) {
        throw std::domain_error("median_heuristic_bandwidth: median pairwise distance is zero");
    }
    return std::sqrt(h / 2.0);
}

double mmd_unbiased(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    const std::size_t m = y.size();
    if (n < 2 || m < 2) {
        throw std::invalid_argument("mmd_unbiased: need at least two samples on each side");
    }
    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const double sigma = median_heuristic_bandwidth(pooled);
    const double scale = -1.0 / (2.0 * sigma * sigma);
    auto within = [&](std::span<const double> v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            for (std::size_t j = i + 1; j < v.size(); ++j) {
                const double d = v[i] - v[j];
                s += std::exp(scale * d * d);
            }
        }
        const double k = static_cast<double>(v.size());
        return 2.0 * s / (k * (k - 1.0));
    };
    double cross = 0.0;
    for (double a : x) {
        for (double b : y) {
            const double d = a - b;
            cross += std::exp(scale * d * d);
        }
    }
    return within(x) + within(y) - 2.0 * cross / (static_cast<double>(n) * static_cast<double>(m));
}

double mmd_unbiased(const SampleTable& pred, const SampleTable& ref)
{
    check_shapes(pred, ref);
    double acc = 0.0;
    for (std::size_t d = 0; d < pred.size(); ++d) {
        acc += mmd_unbiased(pred[d], ref[d]);
    }
    return acc / static_cast<double>(pred.size());
}

double predictive_nll(const SampleTable& ref, const std::vector<Theta>& thetas, const Model& model,
                      const std::vector<Design>& designs)
{
    if (thetas.empty() || ref.size() != designs.size() || designs.empty()) {
        throw std::invalid_argument("predictive_nll: need parameter draws and one row per design");
    }
    double acc = 0.0;
    for (std::size_t d = 0; d < designs.size(); ++d) {
        acc += nll_one(ref[d], thetas, model, designs[d]);
    }
    return acc / static_cast<double>(designs.size());
}

MetricReport compute_metrics(const Belief& belief, const TrueProcess& truth,
                             const std::vector<Design>& designs, const MetricSettings& settings,
                             Rng& rng)
{
    if (designs.empty() || settings.n_samples < 2 || settings.n_theta < 1) {
        throw std::invalid_argument("compute_metrics: bad design list or sample counts");
    }
    auto streams = rng.split(3);
    const Model& model = truth.model;
    const PredictiveSummary pred =
        predictive_summary(belief, model, designs, settings.n_samples, streams[0]);

    SampleTable ref;
    auto ref_streams = streams[1].split(designs.size());
    for (std::size_t d = 0; d < designs.size(); ++d) {
        ref.push_back(dgp_predictive_reference(truth, designs[d], settings.n_samples, ref_streams[d]));
    }

    std::vector<Theta> thetas(settings.n_theta, Theta(theta_dim(belief)));
    for (Theta& th : thetas) {
        sample_theta(belief, streams[2], th);
    }

    MetricReport rep;
    rep.n = settings.n_samples;
    rep.d = designs.size();
    rep.m = settings.n_theta;
    for (std::size_t d = 0; d < designs.size(); ++d) {
        rep.rmse_per_design.push_back(rmse_one(pred.samples[d], ref[d]));
        rep.mmd_per_design.push_back(mmd_unbiased(pred.samples[d], ref[d]));
        rep.nll_per_design.push_back(nll_one(ref[d], thetas, model, designs[d]));
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s / static_cast<double>(v.size());
    };
    rep.rmse = mean(rep.rmse_per_design);
    rep.mmd = mean(rep.mmd_per_design);
    rep.nll = mean(rep.nll_per_design);
    return rep;
}

}  // namespace gboed
