#include "gboed/design_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gboed {

double matern52(std::span<const double> x1, std::span<const double> x2, double lengthscale,
                double variance)
{
    if (x1.size() != x2.size()) {
        throw std::invalid_argument("matern52: dimension mismatch");
    }
    double r2 = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        const double d = x1[i] - x2[i];
        r2 += d * d;
    }
    const double s = std::sqrt(5.0 * r2) / lengthscale;
    return variance * (1.0 + s + 5.0 * r2 / (3.0 * lengthscale * lengthscale)) * std::exp(-s);
}

GpState gp_fit(const std::vector<Design>& points, const std::vector<double>& values,
               const KernelParams& kernel, double jitter)
{
    if (points.size() != values.size() || points.empty()) {
        throw std::invalid_argument("gp_fit: need matching, nonempty inputs and targets");
    }
    if (!(kernel.lengthscale > 0.0 && kernel.variance > 0.0 && jitter > 0.0)) {
        throw std::invalid_argument("gp_fit: kernel parameters and jitter must be positive");
    }
    GpState st;
    st.kernel = kernel;
    std::vector<double> ys;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::find(st.inputs.begin(), st.inputs.end(), points[i]) != st.inputs.end()) {
            continue;
        }
        st.inputs.push_back(points[i]);
        ys.push_back(values[i]);
    }
    const auto n = static_cast<Eigen::Index>(st.inputs.size());
    st.targets = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
    st.mean_offset = st.targets.mean();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = matern52(st.inputs[i], st.inputs[j], kernel.lengthscale, kernel.variance);
            k(j, i) = k(i, j);
        }
    }
    for (double jit = jitter; jit <= 1e-3 * (1.0 + 1e-12); jit *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jit * kernel.variance;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            st.jitter = jit;
            st.chol = llt.matrixL();
            st.alpha = llt.solve((st.targets.array() - st.mean_offset).matrix());
            return st;
        }
    }
    throw std::runtime_error("gp_fit: kernel matrix not positive definite at maximum jitter");
}

void gp_predict_batch(const GpState& state, const std::vector<Design>& xs,
                      std::vector<double>& mean, std::vector<double>& var)
{
    const auto c = static_cast<Eigen::Index>(xs.size());
    mean.assign(xs.size(), 0.0);
    var.assign(xs.size(), state.kernel.variance);
    if (state.size() == 0 || c == 0) {
        return;
    }
    const auto n = static_cast<Eigen::Index>(state.size());
    Eigen::MatrixXd ks(n, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            ks(i, j) = matern52(state.inputs[i], xs[j], state.kernel.lengthscale,
                                state.kernel.variance);
        }
    }
    const Eigen::VectorXd mu = ks.transpose() * state.alpha;
    const Eigen::MatrixXd v = state.chol.triangularView<Eigen::Lower>().solve(ks);
    const Eigen::VectorXd reduce = v.colwise().squaredNorm();
    for (Eigen::Index j = 0; j < c; ++j) {
        mean[j] = mu(j) + state.mean_offset;
        var[j] = std::max(state.kernel.variance - reduce(j), 0.0);
    }
}

std::pair<double, double> gp_predict(const GpState& state, std::span<const double> x)
{
    std::vector<double> m, v;
    gp_predict_batch(state, {Design(x.begin(), x.end())}, m, v);
    return {m[0], v[0]};
}

std::vector<double> ucb_scores(const GpState& state, const std::vector<Design>& xs, double lambda)
{
    std::vector<double> m, v;
    gp_predict_batch(state, xs, m, v);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] += lambda * std::sqrt(v[i]);
    }
    return m;
}

void validate(const AcquisitionSpec& acq)
{
    if (const auto* g = std::get_if<GridAcquisition>(&acq)) {
        if (g->n_points < 1) {
            throw std::invalid_argument("GridAcquisition: n_points must be >= 1");
        }
    }
    if (const auto* b = std::get_if<BayesOptAcquisition>(&acq)) {
        if (!(b->lengthscale > 0.0 && b->variance > 0.0 && b->ucb_lambda >= 0.0)) {
            throw std::invalid_argument("BayesOptAcquisition: hyperparameters must be positive");
        }
        if (b->n_evaluations < 1 || b->n_evaluations > b->candidate_pool_size) {
            throw std::invalid_argument(
                "BayesOptAcquisition: need 1 <= n_evaluations <= candidate_pool_size");
        }
    }
}

AcquisitionSpec default_acquisition(const Model& model)
{
    if (std::holds_alternative<Pharmacokinetic>(model.spec())) {
        return BayesOptAcquisition{20.0, 10.0, 6.0, 3000, 3000};
    }
    if (std::holds_alternative<LocationFinding>(model.spec())) {
        return BayesOptAcquisition{15.0, 4.0, 12.0, 5000, 5000};
    }
    return GridAcquisition{100};
}

std::vector<Design> design_grid(const DesignSpace& space, std::size_t n_points)
{
    const std::size_t d = space.dim();
    if (d == 0 || n_points == 0) {
        throw std::invalid_argument("design_grid: empty design space or grid");
    }
    std::vector<std::vector<double>> axes(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double lo = space.lo[k];
        const double hi = space.hi[k];
        for (std::size_t i = 0; i < n_points; ++i) {
            if (n_points == 1) {
                axes[k].push_back(0.5 * (lo + hi));
            } else if (i + 1 == n_points) {
                axes[k].push_back(hi);
            } else {
                axes[k].push_back(lo + (hi - lo) * static_cast<double>(i) /
                                           static_cast<double>(n_points - 1));
            }
        }
    }
    std::vector<Design> grid;
    std::vector<std::size_t> idx(d, 0);
    while (true) {
        Design xi(d);
        for (std::size_t k = 0; k < d; ++k) {
            xi[k] = axes[k][idx[k]];
        }
        grid.push_back(std::move(xi));
        std::size_t k = d;
        while (k > 0) {
            --k;
            if (++idx[k] < n_points) {
                break;
            }
            idx[k] = 0;
            if (k == 0) {
                return grid;
            }
        }
    }
}

namespace {

Selection best_of(const std::vector<Design>& xs, const std::vector<EigEstimate>& est)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (est[i].value > est[best].value ||
            (est[i].value == est[best].value && xs[i] < xs[best])) {
            best = i;
        }
    }
    return {xs[best], est[best].value, xs.size()};
}

std::vector<EigEstimate> checked_eval(const EigBatchFn& eig_fn, const std::vector<Design>& xs,
                                      const DesignSpace& space)
{
    for (const Design& x : xs) {
        if (!space.contains(x)) {
            throw std::logic_error("select_design: candidate outside the design space");
        }
    }
    auto est = eig_fn(xs);
    if (est.size() != xs.size()) {
        throw std::runtime_error("select_design: evaluator returned the wrong number of values");
    }
    return est;
}

}  // namespace

Selection select_design(const AcquisitionSpec& acq, const EigBatchFn& eig_fn,
                        const DesignSpace& space, Rng& rng)
{
    validate(acq);
    if (space.dim() == 0) {
        throw std::invalid_argument("select_design: empty design space");
    }
    if (const auto* g = std::get_if<GridAcquisition>(&acq)) {
        const auto grid = design_grid(space, g->n_points);
        return best_of(grid, checked_eval(eig_fn, grid, space));
    }
    if (std::holds_alternative<RandomAcquisition>(acq)) {
        return {space.sample(rng), std::numeric_limits<double>::quiet_NaN(), 0};
    }
    const auto& bo = std::get<BayesOptAcquisition>(acq);
    const KernelParams kernel{bo.lengthscale, bo.variance};
    const std::size_t pool = std::min<std::size_t>(500, bo.candidate_pool_size);

    std::vector<Design> xs;
    const std::size_t n_seed = std::min<std::size_t>(5, bo.n_evaluations);
    for (std::size_t i = 0; i < n_seed; ++i) {
        xs.push_back(space.sample(rng));
    }
    std::vector<double> ys;
    for (const EigEstimate& e : checked_eval(eig_fn, xs, space)) {
        ys.push_back(e.value);
    }
    std::vector<Design> cand(pool);
    while (xs.size() < bo.n_evaluations) {
        const GpState gp = gp_fit(xs, ys, kernel);
        for (Design& c : cand) {
            c = space.sample(rng);
        }
        const auto score = ucb_scores(gp, cand, bo.ucb_lambda);
        const auto top = static_cast<std::size_t>(
            std::max_element(score.begin(), score.end()) - score.begin());
        const auto est = checked_eval(eig_fn, {cand[top]}, space);
        xs.push_back(cand[top]);
        ys.push_back(est[0].value);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (ys[i] > ys[best]) {
            best = i;
        }
    }
    return {xs[best], ys[best], xs.size()};
}

}  // namespace gboed
