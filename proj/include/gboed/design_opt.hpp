#pragma once

#include <functional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gboed/eig.hpp"
#include "gboed/models.hpp"
#include "gboed/rng.hpp"

namespace gboed {

double matern52(std::span<const double> x1, std::span<const double> x2, double lengthscale,
                double variance);

struct KernelParams {
    double lengthscale = 1.0;
    double variance = 1.0;
};

/// Noise-free GP regression state with a constant mean equal to the data mean.
struct GpState {
    KernelParams kernel;
    std::vector<Design> inputs;
    Eigen::VectorXd targets;
    double mean_offset = 0.0;
    double jitter = 1e-6;
    Eigen::MatrixXd chol;  // lower factor of K + jitter * variance * I
    Eigen::VectorXd alpha;

    std::size_t size() const { return inputs.size(); }
};

/// Duplicate inputs keep their first value. The jitter grows tenfold up to 1e-3
/// if the kernel matrix is not numerically SPD.
GpState gp_fit(const std::vector<Design>& points, const std::vector<double>& values,
               const KernelParams& kernel, double jitter = 1e-6);

/// Posterior (mean, variance); an empty state returns (0, kernel variance).
std::pair<double, double> gp_predict(const GpState& state, std::span<const double> x);

/// Means and variances for many candidates in one triangular solve.
void gp_predict_batch(const GpState& state, const std::vector<Design>& xs,
                      std::vector<double>& mean, std::vector<double>& var);

/// mean + lambda * std for each candidate.
std::vector<double> ucb_scores(const GpState& state, const std::vector<Design>& xs, double lambda);

struct GridAcquisition {
    std::size_t n_points = 100;  // per design dimension
};
struct RandomAcquisition {};
struct BayesOptAcquisition {
    double lengthscale = 1.0;
    double variance = 1.0;
    double ucb_lambda = 2.0;
    std::size_t n_evaluations = 100;
    std::size_t candidate_pool_size = 500;
};

using AcquisitionSpec = std::variant<GridAcquisition, RandomAcquisition, BayesOptAcquisition>;

void validate(const AcquisitionSpec& acq);

/// Full-budget BO settings: PK (20, 10, 6, 3000), LF (15, 4, 12, 5000); LR uses a 100-point grid.
AcquisitionSpec default_acquisition(const Model& model);

/// Tensor grid with n_points per axis, in lexicographic order.
std::vector<Design> design_grid(const DesignSpace& space, std::size_t n_points);

/// Evaluates the utility on a batch of designs.
using EigBatchFn = std::function<std::vector<EigEstimate>(const std::vector<Design>&)>;

struct Selection {
    Design xi;
    /// utility at xi; NaN for random acquisition
    double eig;
    std::size_t evaluations;
};

Selection select_design(const AcquisitionSpec& acq, const EigBatchFn& eig_fn,
                        const DesignSpace& space, Rng& rng);

}  // namespace gboed
