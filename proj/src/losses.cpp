#include "gboed/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gboed {

ImqWeight imq_weight(double y, const ImqParams& p)
{
    if (!(p.c > 0.0)) {
        throw std::domain_error("imq_weight: shrinking scale c must be positive");
    }
    const double d = y - p.gamma;
    const double base = 1.0 + (d * d) / (p.c * p.c);
    const double r = p.amplitude / std::sqrt(base);
    return {r, -p.amplitude * d / (p.c * p.c) / (base * std::sqrt(base))};
}

ImqWeight imq_weight(double y, std::span<const double> xi, const LossSpec& spec,
                     const LossContext& ctx)
{
    return imq_weight(y, resolve_imq(spec, ctx, xi));
}

double exp_decay_c(int index, double q1, double q2, double b)
{
    if (index < 1) {
        throw std::invalid_argument("exp_decay_c: experiment index starts at 1");
    }
    return q1 * std::exp(-b * static_cast<double>(index - 1)) + q2;
}

std::pair<double, double> laplante_params(const PredictiveMoments& predictive)
{
    if (!(predictive.std > 0.0) || !std::isfinite(predictive.std)) {
        throw std::domain_error("laplante_params: degenerate predictive distribution");
    }
    return {predictive.mean, predictive.std};
}

void validate(const LossSpec& spec)
{
    if (const auto* s = std::get_if<ExpDecaySchedule>(&spec.schedule)) {
        if (!(s->q1 > 0.0 && s->q2 > 0.0 && s->b > 0.0)) {
            throw std::invalid_argument("ExpDecaySchedule: q1, q2, b must be positive");
        }
    }
}

ImqParams resolve_imq(const LossSpec& spec, const LossContext& ctx, std::span<const double> xi)
{
    if (spec.kind != LossKind::WeightedSM) {
        return {};
    }
    if (!ctx.predictive) {
        throw std::invalid_argument("WeightedSM loss needs a predictive summary in its context");
    }
    if (!(ctx.kernel_amplitude > 0.0)) {
        throw std::invalid_argument("LossContext: kernel amplitude must be positive");
    }
    const PredictiveMoments pred = ctx.predictive(xi);
    if (const auto* decay = std::get_if<ExpDecaySchedule>(&spec.schedule)) {
        return {pred.mean, exp_decay_c(ctx.index, decay->q1, decay->q2, decay->b),
                ctx.kernel_amplitude};
    }
    const auto [gamma, c] = laplante_params(pred);
    return {gamma, c, ctx.kernel_amplitude};
}

double loss_from_moments(LossKind kind, double y, const Moments& m, const ImqParams& imq)
{
    if (kind == LossKind::NegLogLik) {
        return -normal_logpdf(y, m.mean, m.std);
    }
    const double prec = 1.0 / (m.std * m.std);
    const double score = -(y - m.mean) * prec;
    const double score_dy = -prec;
    if (kind == LossKind::UnweightedSM) {
        return score * score + 2.0 * score_dy;
    }
    const ImqWeight w = imq_weight(y, imq);
    const double rs = w.r * score;
    return rs * rs + 2.0 * (2.0 * w.r * w.dr_dy * score + w.r * w.r * score_dy);
}

LossPartials loss_partials(LossKind kind, double y, const Moments& m, const ImqParams& imq)
{
    const double e = y - m.mean;
    const double s2 = m.std * m.std;
    if (kind == LossKind::NegLogLik) {
        return {-normal_logpdf(y, m.mean, m.std), -e / s2, 1.0 / m.std - e * e / (s2 * m.std)};
    }
    double r = 1.0;
    double dr = 0.0;
    if (kind == LossKind::WeightedSM) {
        const ImqWeight w = imq_weight(y, imq);
        r = w.r;
        dr = w.dr_dy;
    }
    const double r2 = r * r;
    const double s4 = s2 * s2;
    const double value = r2 * e * e / s4 - 4.0 * r * dr * e / s2 - 2.0 * r2 / s2;
    const double d_mean = -2.0 * r2 * e / s4 + 4.0 * r * dr / s2;
    const double d_std = -4.0 * r2 * e * e / (s4 * m.std) + 8.0 * r * dr * e / (s2 * m.std) +
                         4.0 * r2 / (s2 * m.std);
    return {value, d_mean, d_std};
}

double loss_eval(const LossSpec& spec, std::span<const double> theta, std::span<const double> xi,
                 double y, const LossContext& ctx, const Model& model)
{
    const ImqParams imq = resolve_imq(spec, ctx, xi);
    return loss_from_moments(spec.kind, y, model.moments(theta, xi), imq);
}

}  // namespace gboed
