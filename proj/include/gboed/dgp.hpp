#pragma once

#include <span>
#include <variant>
#include <vector>

#include "gboed/models.hpp"
#include "gboed/rng.hpp"

namespace gboed {

struct WellSpecified {};

/// With probability `prob` the clean outcome is reduced by U(shift_lo, shift_hi).
struct AsymmetricOutliers {
    double prob;
    double shift_lo;
    double shift_hi;
};

/// Laplace noise with the assumed model's location and scale.
struct LaplaceErrors {};

/// Replacement PK noise variances.
struct PkNoise {
    double mult_var;
    double add_var;
};

/// Replacement observation std for location finding.
struct ScaledNoise {
    double sigma;
};

using ErrorDistribution = std::variant<LaplaceErrors, PkNoise, ScaledNoise>;
using Scenario = std::variant<WellSpecified, AsymmetricOutliers, ErrorDistribution>;

void validate(const Scenario& scenario, const Model& model);

struct TrueProcess {
    Model model;
    Theta theta_star;
    Scenario scenario = WellSpecified{};
};

/// Per-problem contamination defaults: LR p=0.3 U(3s, 9s); PK p=0.5 U(3, 7); LF p=0.3 U(3s, 7s).
AsymmetricOutliers default_outliers(const Model& model);

/// Draw one observation from the true process. The noise draw consumes `rng`
/// exactly as model_simulate does; contamination draws come from a split sub-stream.
double dgp_sample(const TrueProcess& proc, std::span<const double> xi, Rng& rng);

/// n outlier-free draws (contamination removed, substituted noise kept).
std::vector<double> dgp_predictive_reference(const TrueProcess& proc, std::span<const double> xi,
                                             std::size_t n, Rng& rng);

/// The three benchmark regression truths: (10, -7) s=1.2, (-3, 8) s=0.8, (9, 9) s=1.
struct RegressionTruth {
    Theta theta;
    double sigma;
};
const std::vector<RegressionTruth>& regression_truths();

/// (k_a, k_e, V) = (1.5, 0.15, 15).
Theta pharmacokinetic_truth();

/// First `dim` coordinates of each of the two 16-dimensional source locations.
Theta location_finding_truth(std::size_t dim);

}  // namespace gboed
