#pragma once

#include <span>
#include <vector>

#include "gboed/dgp.hpp"
#include "gboed/inference.hpp"
#include "gboed/models.hpp"
#include "gboed/rng.hpp"

namespace gboed {

using SampleTable = std::vector<std::vector<double>>;  // [design][sample]

/// Mean over designs of the root mean squared difference of index-paired samples.
double rmse_metric(const SampleTable& pred, const SampleTable& ref);

/// sqrt(H / 2) with H the median squared distance over pairs i < j.
double median_heuristic_bandwidth(std::span<const double> points);

/// Unbiased MMD^2 between two samples, RBF kernel with the median-heuristic
/// bandwidth of the pooled sample.
double mmd_unbiased(std::span<const double> x, std::span<const double> y);

/// Per-design unbiased MMD^2 averaged over designs.
double mmd_unbiased(const SampleTable& pred, const SampleTable& ref);

/// Negative mean log of the Monte Carlo predictive density of the reference outcomes.
double predictive_nll(const SampleTable& ref, const std::vector<Theta>& thetas, const Model& model,
                      const std::vector<Design>& designs);

struct MetricSettings {
    std::size_t n_samples = 1000;  // predictive and reference draws per design
    std::size_t n_theta = 1000;    // posterior draws for the NLL
};

struct MetricReport {
    double rmse = 0.0;
    double mmd = 0.0;
    double nll = 0.0;
    std::vector<double> rmse_per_design;
    std::vector<double> mmd_per_design;
    std::vector<double> nll_per_design;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t m = 0;
};

/// All three metrics of a posterior against outlier-free reference draws.
MetricReport compute_metrics(const Belief& belief, const TrueProcess& truth,
                             const std::vector<Design>& designs, const MetricSettings& settings,
                             Rng& rng);

}  // namespace gboed
