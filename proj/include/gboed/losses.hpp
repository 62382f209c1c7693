#pragma once

#include <functional>
#include <span>
#include <variant>

#include "gboed/models.hpp"

namespace gboed {

/// c taken from the posterior-predictive standard deviation at the design.
struct LaplanteSchedule {};

/// c(i) = q1 * exp(-b (i - 1)) + q2 for experiment i >= 1.
struct ExpDecaySchedule {
    double q1;
    double q2;
    double b;
};

using ImqSchedule = std::variant<LaplanteSchedule, ExpDecaySchedule>;

enum class LossKind { NegLogLik, UnweightedSM, WeightedSM };

struct LossSpec {
    LossKind kind = LossKind::NegLogLik;
    ImqSchedule schedule = LaplanteSchedule{};
};

struct PredictiveMoments {
    double mean;
    double std;
};

/// Side information a loss may need at experiment `index`. The predictive
/// callback is frozen for the whole step.
struct LossContext {
    int index = 1;
    std::function<PredictiveMoments(std::span<const double>)> predictive;
    double kernel_amplitude = 1.0;
};

/// Resolved IMQ bump parameters at a single design.
struct ImqParams {
    double gamma = 0.0;
    double c = 1.0;
    double amplitude = 1.0;
};

struct ImqWeight {
    double r;
    double dr_dy;
};

ImqWeight imq_weight(double y, const ImqParams& params);
/// Resolves (gamma, c) at xi, then evaluates the weight.
ImqWeight imq_weight(double y, std::span<const double> xi, const LossSpec& spec,
                     const LossContext& ctx);

double exp_decay_c(int index, double q1, double q2, double b);

/// (gamma, c) = (predictive mean, predictive std).
std::pair<double, double> laplante_params(const PredictiveMoments& predictive);

/// IMQ parameters for a weighted loss at xi; throws if the context cannot supply them.
ImqParams resolve_imq(const LossSpec& spec, const LossContext& ctx, std::span<const double> xi);

/// Loss given the assumed model's outcome moments. `imq` is read only for WeightedSM.
double loss_from_moments(LossKind kind, double y, const Moments& m, const ImqParams& imq);

/// d loss / d mean and d loss / d std at fixed y.
struct LossPartials {
    double value;
    double d_mean;
    double d_std;
};
LossPartials loss_partials(LossKind kind, double y, const Moments& m, const ImqParams& imq);

double loss_eval(const LossSpec& spec, std::span<const double> theta, std::span<const double> xi,
                 double y, const LossContext& ctx, const Model& model);

void validate(const LossSpec& spec);

}  // namespace gboed
