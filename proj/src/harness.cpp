#include "gboed/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace gboed {

namespace {

using nlohmann::json;

// Keys of the per-run random streams. Each stream is derived from the seed and
// its key alone, so changing one component never shifts another's draws.
enum StreamTag : std::uint64_t {
    kEig = 1,
    kAcquire = 2,
    kObserve = 3,
    kFit = 4,
    kContext = 5,
    kMetrics = 6,
    kMetricDesigns = 7,
    kParticles = 8,
    kSurface = 9,
};

template <class T>
T value_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

const char* utility_name(Utility u)
{
    switch (u) {
    case Utility::Gibbs:
        return "gibbs";
    case Utility::Bayes:
        return "beig";
    case Utility::GibbsNoWeight:
        return "gibbs_noweight";
    }
    return "gibbs";
}

Utility parse_utility(const std::string& s)
{
    if (s == "gibbs") {
        return Utility::Gibbs;
    }
    if (s == "beig") {
        return Utility::Bayes;
    }
    if (s == "gibbs_noweight") {
        return Utility::GibbsNoWeight;
    }
    throw std::invalid_argument("unknown utility '" + s + "'");
}

const char* loss_name(LossKind k)
{
    switch (k) {
    case LossKind::NegLogLik:
        return "nll";
    case LossKind::UnweightedSM:
        return "sm";
    case LossKind::WeightedSM:
        return "wsm";
    }
    return "nll";
}

LossKind parse_loss_kind(const std::string& s)
{
    if (s == "nll") {
        return LossKind::NegLogLik;
    }
    if (s == "sm") {
        return LossKind::UnweightedSM;
    }
    if (s == "wsm") {
        return LossKind::WeightedSM;
    }
    throw std::invalid_argument("unknown loss '" + s + "'");
}

ProblemSpec parse_problem(const json& j)
{
    ProblemSpec p;
    const auto kind = value_or<std::string>(j, "kind", "lr");
    if (kind == "lr") {
        p.kind = ProblemKind::LinearRegression;
    } else if (kind == "pk") {
        p.kind = ProblemKind::Pharmacokinetic;
    } else if (kind == "lf") {
        p.kind = ProblemKind::LocationFinding;
    } else {
        throw std::invalid_argument("unknown problem '" + kind + "'");
    }
    p.dim = value_or<std::size_t>(j, "dim", p.dim);
    p.truth = value_or<std::size_t>(j, "truth", p.truth);
    return p;
}

json problem_json(const ProblemSpec& p)
{
    switch (p.kind) {
    case ProblemKind::LinearRegression:
        return {{"kind", "lr"}, {"truth", p.truth}};
    case ProblemKind::Pharmacokinetic:
        return {{"kind", "pk"}};
    case ProblemKind::LocationFinding:
        return {{"kind", "lf"}, {"dim", p.dim}};
    }
    return {};
}

Model model_for(const ProblemSpec& p)
{
    switch (p.kind) {
    case ProblemKind::LinearRegression: {
        const auto& truths = regression_truths();
        if (p.truth >= truths.size()) {
            throw std::invalid_argument("regression truth index out of range");
        }
        return Model(LinearRegression{truths[p.truth].sigma});
    }
    case ProblemKind::Pharmacokinetic:
        return Model(Pharmacokinetic{});
    case ProblemKind::LocationFinding: {
        LocationFinding lf;
        lf.dim = p.dim;
        return Model(lf);
    }
    }
    throw std::logic_error("unreachable problem kind");
}

Scenario parse_scenario(const json& j, const Model& model)
{
    const auto kind = value_or<std::string>(j, "kind", "well_specified");
    if (kind == "well_specified") {
        return WellSpecified{};
    }
    if (kind == "outliers") {
        AsymmetricOutliers o = default_outliers(model);
        o.prob = value_or(j, "prob", o.prob);
        o.shift_lo = value_or(j, "shift_lo", o.shift_lo);
        o.shift_hi = value_or(j, "shift_hi", o.shift_hi);
        return o;
    }
    if (kind == "laplace") {
        return ErrorDistribution{LaplaceErrors{}};
    }
    if (kind == "pk_noise") {
        const Pharmacokinetic pk{};
        return ErrorDistribution{
            PkNoise{value_or(j, "mult_var", pk.mult_var), value_or(j, "add_var", pk.add_var)}};
    }
    if (kind == "scaled_noise") {
        return ErrorDistribution{ScaledNoise{value_or(j, "sigma", 1.0)}};
    }
    throw std::invalid_argument("unknown scenario '" + kind + "'");
}

json scenario_json(const Scenario& s)
{
    if (std::holds_alternative<WellSpecified>(s)) {
        return {{"kind", "well_specified"}};
    }
    if (const auto* o = std::get_if<AsymmetricOutliers>(&s)) {
        return {{"kind", "outliers"}, {"prob", o->prob}, {"shift_lo", o->shift_lo},
                {"shift_hi", o->shift_hi}};
    }
    const auto& e = std::get<ErrorDistribution>(s);
    if (std::holds_alternative<LaplaceErrors>(e)) {
        return {{"kind", "laplace"}};
    }
    if (const auto* n = std::get_if<PkNoise>(&e)) {
        return {{"kind", "pk_noise"}, {"mult_var", n->mult_var}, {"add_var", n->add_var}};
    }
    return {{"kind", "scaled_noise"}, {"sigma", std::get<ScaledNoise>(e).sigma}};
}

LossSpec parse_loss(const json& j, LossSpec base)
{
    if (j.contains("kind")) {
        base.kind = parse_loss_kind(j.at("kind").get<std::string>());
    }
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        const auto kind = value_or<std::string>(s, "kind", "exp_decay");
        if (kind == "laplante") {
            base.schedule = LaplanteSchedule{};
        } else if (kind == "exp_decay") {
            ExpDecaySchedule d{9.0, 1.0, 0.04};
            if (const auto* prev = std::get_if<ExpDecaySchedule>(&base.schedule)) {
                d = *prev;
            }
            d.q1 = value_or(s, "q1", d.q1);
            d.q2 = value_or(s, "q2", d.q2);
            d.b = value_or(s, "b", d.b);
            base.schedule = d;
        } else {
            throw std::invalid_argument("unknown IMQ schedule '" + kind + "'");
        }
    }
    return base;
}

json loss_json(const LossSpec& l)
{
    json sched;
    if (const auto* d = std::get_if<ExpDecaySchedule>(&l.schedule)) {
        sched = {{"kind", "exp_decay"}, {"q1", d->q1}, {"q2", d->q2}, {"b", d->b}};
    } else {
        sched = {{"kind", "laplante"}};
    }
    return {{"kind", loss_name(l.kind)}, {"schedule", sched}};
}

AcquisitionSpec parse_acquisition(const json& j, const AcquisitionSpec& fallback,
                                  const Model& model)
{
    const auto kind = value_or<std::string>(j, "kind", "");
    if (kind == "grid" || (kind.empty() && std::holds_alternative<GridAcquisition>(fallback))) {
        GridAcquisition g = std::holds_alternative<GridAcquisition>(fallback)
                                ? std::get<GridAcquisition>(fallback)
                                : GridAcquisition{};
        g.n_points = value_or(j, "n_points", g.n_points);
        return g;
    }
    if (kind == "random") {
        return RandomAcquisition{};
    }
    if (kind == "bayesopt" || kind.empty()) {
        BayesOptAcquisition b;
        const AcquisitionSpec problem_default = default_acquisition(model);
        if (const auto* f = std::get_if<BayesOptAcquisition>(&fallback)) {
            b = *f;
        } else if (const auto* d = std::get_if<BayesOptAcquisition>(&problem_default)) {
            b = *d;
        }
        b.lengthscale = value_or(j, "lengthscale", b.lengthscale);
        b.variance = value_or(j, "variance", b.variance);
        b.ucb_lambda = value_or(j, "ucb_lambda", b.ucb_lambda);
        b.n_evaluations = value_or(j, "n_evaluations", b.n_evaluations);
        b.candidate_pool_size = value_or(j, "candidate_pool_size", b.candidate_pool_size);
        return b;
    }
    throw std::invalid_argument("unknown acquisition '" + kind + "'");
}

json acquisition_json(const AcquisitionSpec& a)
{
    if (const auto* g = std::get_if<GridAcquisition>(&a)) {
        return {{"kind", "grid"}, {"n_points", g->n_points}};
    }
    if (std::holds_alternative<RandomAcquisition>(a)) {
        return {{"kind", "random"}};
    }
    const auto& b = std::get<BayesOptAcquisition>(a);
    return {{"kind", "bayesopt"},           {"lengthscale", b.lengthscale},
            {"variance", b.variance},       {"ucb_lambda", b.ucb_lambda},
            {"n_evaluations", b.n_evaluations}, {"candidate_pool_size", b.candidate_pool_size}};
}

bool misspecified(const Scenario& s) { return !std::holds_alternative<WellSpecified>(s); }

void mean_std(const std::vector<double>& v, double& mean, double& sd)
{
    mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

LossContext context_for(const RunConfig& cfg, const Model& model, const Belief& belief, int step,
                        const Rng& base)
{
    if (cfg.loss.kind != LossKind::WeightedSM) {
        LossContext ctx;
        ctx.index = step;
        return ctx;
    }
    Rng r = base.derive({kContext, static_cast<std::uint64_t>(step)});
    return make_loss_context(belief, model, step, cfg.inference.context_samples, r,
                             cfg.inference.kernel_amplitude);
}

Belief fit(const RunConfig& cfg, const Model& model, const PriorSpec& prior,
           const ExperimentHistory& hist, const Belief& previous, int step, const Rng& base)
{
    if (cfg.inference.backend == Backend::Snis) {
        Rng r = base.derive({kParticles});
        return snis_posterior(prior, model, cfg.loss, cfg.omega, hist, cfg.inference.particles, r);
    }
    Rng r = base.derive({kFit, static_cast<std::uint64_t>(step)});
    std::optional<GaussianApprox> init;
    if (cfg.inference.warm_start) {
        if (const auto* g = std::get_if<GaussianApprox>(&previous)) {
            init = *g;
        }
    }
    return fit_variational(prior, model, cfg.loss.kind, cfg.omega, hist, cfg.inference.variational,
                           r, init);
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(cell);
    }
    return out;
}

void ensure_parent(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
}

std::ofstream open_out(const std::filesystem::path& path)
{
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    return out;
}

}  // namespace

RunConfig default_config(const ProblemSpec& problem, const Scenario& scenario)
{
    RunConfig cfg;
    cfg.problem = problem;
    cfg.scenario = scenario;
    const Model model = model_for(problem);
    cfg.acquisition = default_acquisition(model);
    cfg.loss.kind = LossKind::WeightedSM;
    switch (problem.kind) {
    case ProblemKind::LinearRegression:
        cfg.horizon = 10;
        cfg.omega = 1.0;
        cfg.loss.schedule = ExpDecaySchedule{9.0, 1.0, 0.04};
        break;
    case ProblemKind::Pharmacokinetic:
        cfg.horizon = 5;
        cfg.omega = misspecified(scenario) ? 0.1 : 0.8;
        cfg.loss.schedule = ExpDecaySchedule{0.8, 0.2, 0.04};
        break;
    case ProblemKind::LocationFinding:
        cfg.horizon = 30;
        cfg.omega = 0.2;
        cfg.loss.schedule = ExpDecaySchedule{9.0, 1.0, 0.04};
        break;
    }
    cfg.eig.omega = cfg.omega;
    return cfg;
}

RunConfig parse_config(const json& doc)
{
    const ProblemSpec problem = parse_problem(doc.value("problem", json::object()));
    const Model model = model_for(problem);
    const Scenario scenario = parse_scenario(doc.value("scenario", json::object()), model);
    RunConfig cfg = default_config(problem, scenario);
    cfg.label = value_or(doc, "label", cfg.label);
    cfg.loss = parse_loss(doc.value("loss", json::object()), cfg.loss);
    cfg.omega = value_or(doc, "omega", cfg.omega);
    if (doc.contains("utility")) {
        cfg.utility = parse_utility(doc.at("utility").get<std::string>());
    }
    if (doc.contains("acquisition")) {
        cfg.acquisition = parse_acquisition(doc.at("acquisition"), cfg.acquisition, model);
    }
    if (doc.contains("inference")) {
        const json& j = doc.at("inference");
        const auto backend = value_or<std::string>(j, "backend", "variational");
        if (backend == "snis") {
            cfg.inference.backend = Backend::Snis;
        } else if (backend == "variational") {
            cfg.inference.backend = Backend::Variational;
        } else {
            throw std::invalid_argument("unknown inference backend '" + backend + "'");
        }
        auto& inf = cfg.inference;
        inf.particles = value_or(j, "particles", inf.particles);
        inf.variational.steps = value_or(j, "steps", inf.variational.steps);
        inf.variational.step_size = value_or(j, "step_size", inf.variational.step_size);
        inf.variational.n_mc = value_or(j, "n_mc", inf.variational.n_mc);
        const auto grad = value_or<std::string>(j, "gradient", "pathwise");
        inf.variational.gradient =
            grad == "finite_difference" ? GradientMode::FiniteDifference : GradientMode::Pathwise;
        inf.warm_start = value_or(j, "warm_start", inf.warm_start);
        inf.context_samples = value_or(j, "context_samples", inf.context_samples);
        inf.kernel_amplitude = value_or(j, "kernel_amplitude", inf.kernel_amplitude);
    }
    cfg.horizon = value_or(doc, "horizon", cfg.horizon);
    if (doc.contains("eig")) {
        const json& j = doc.at("eig");
        cfg.eig.outer = value_or(j, "outer", cfg.eig.outer);
        cfg.eig.inner = value_or(j, "inner", cfg.eig.inner);
        cfg.eig.reuse_inner = value_or(j, "reuse_inner", cfg.eig.reuse_inner);
    }
    cfg.eig.omega = cfg.omega;
    if (doc.contains("metrics")) {
        const json& j = doc.at("metrics");
        auto& m = cfg.metrics;
        m.settings.n_samples = value_or(j, "n_samples", m.settings.n_samples);
        m.settings.n_theta = value_or(j, "n_theta", m.settings.n_theta);
        m.n_designs = value_or(j, "n_designs", m.n_designs);
        m.every_step = value_or(j, "every_step", m.every_step);
    }
    if (doc.contains("seeds")) {
        const json& s = doc.at("seeds");
        if (s.is_string()) {
            cfg.seeds = parse_seed_range(s.get<std::string>());
        } else {
            cfg.seeds = s.get<std::vector<std::uint64_t>>();
        }
    }
    cfg.output_dir = value_or(doc, "output_dir", cfg.output_dir);
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read config " + path.string());
    }
    return parse_config(json::parse(in));
}

json to_json(const RunConfig& cfg)
{
    const auto& inf = cfg.inference;
    return {
        {"label", cfg.label},
        {"problem", problem_json(cfg.problem)},
        {"scenario", scenario_json(cfg.scenario)},
        {"loss", loss_json(cfg.loss)},
        {"omega", cfg.omega},
        {"utility", utility_name(cfg.utility)},
        {"acquisition", acquisition_json(cfg.acquisition)},
        {"inference",
         {{"backend", inf.backend == Backend::Snis ? "snis" : "variational"},
          {"particles", inf.particles},
          {"steps", inf.variational.steps},
          {"step_size", inf.variational.step_size},
          {"n_mc", inf.variational.n_mc},
          {"gradient", inf.variational.gradient == GradientMode::Pathwise ? "pathwise"
                                                                          : "finite_difference"},
          {"warm_start", inf.warm_start},
          {"context_samples", inf.context_samples},
          {"kernel_amplitude", inf.kernel_amplitude}}},
        {"horizon", cfg.horizon},
        {"eig", {{"outer", cfg.eig.outer}, {"inner", cfg.eig.inner}, {"reuse_inner", cfg.eig.reuse_inner}}},
        {"metrics",
         {{"n_samples", cfg.metrics.settings.n_samples},
          {"n_theta", cfg.metrics.settings.n_theta},
          {"n_designs", cfg.metrics.n_designs},
          {"every_step", cfg.metrics.every_step}}},
        {"seeds", cfg.seeds},
        {"output_dir", cfg.output_dir},
    };
}

void validate(const RunConfig& cfg)
{
    if (cfg.horizon < 1) {
        throw std::invalid_argument("RunConfig: horizon must be >= 1");
    }
    if (cfg.seeds.empty()) {
        throw std::invalid_argument("RunConfig: need at least one seed");
    }
    if (!(cfg.omega > 0.0)) {
        throw std::invalid_argument("RunConfig: omega must be positive");
    }
    if (cfg.inference.particles < 1 || cfg.inference.context_samples < 1) {
        throw std::invalid_argument("RunConfig: particle and context counts must be >= 1");
    }
    if (cfg.metrics.n_designs < 1) {
        throw std::invalid_argument("RunConfig: need at least one metric design");
    }
    const Model model = model_for(cfg.problem);
    validate(cfg.scenario, model);
    validate(cfg.loss);
    validate(cfg.acquisition);
    EigConfig e = cfg.eig;
    e.omega = cfg.omega;
    validate(e);
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text)
{
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            return {std::stoull(text)};
        }
        const auto a = std::stoull(text.substr(0, dots));
        const auto b = std::stoull(text.substr(dots + 2));
        if (b < a) {
            throw std::invalid_argument("empty range");
        }
        std::vector<std::uint64_t> out;
        for (auto s = a; s <= b; ++s) {
            out.push_back(s);
        }
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad seed range '" + text + "' (expected a..b)");
    }
}

Model make_model(const RunConfig& cfg) { return model_for(cfg.problem); }

TrueProcess make_truth(const RunConfig& cfg)
{
    const Model model = make_model(cfg);
    Theta theta;
    switch (cfg.problem.kind) {
    case ProblemKind::LinearRegression:
        theta = regression_truths().at(cfg.problem.truth).theta;
        break;
    case ProblemKind::Pharmacokinetic:
        theta = pharmacokinetic_truth();
        break;
    case ProblemKind::LocationFinding:
        theta = location_finding_truth(cfg.problem.dim);
        break;
    }
    return {model, theta, cfg.scenario};
}

PriorSpec make_prior(const RunConfig& cfg) { return default_prior(make_model(cfg)); }

std::vector<Design> metric_designs(const RunConfig& cfg, std::uint64_t seed)
{
    const DesignSpace space = make_model(cfg).design_space();
    if (cfg.problem.kind == ProblemKind::LinearRegression) {
        return design_grid(space, 100);
    }
    Rng r = Rng(seed).derive({kMetricDesigns});
    std::vector<Design> out;
    for (std::size_t i = 0; i < cfg.metrics.n_designs; ++i) {
        out.push_back(space.sample(r));
    }
    return out;
}

void belief_summary(const Belief& belief, std::vector<double>& mean, std::vector<double>& sd)
{
    if (const auto* g = std::get_if<GaussianApprox>(&belief)) {
        mean = g->dist.mean();
        sd = g->dist.std();
        if (g->log_space) {
            for (std::size_t j = 0; j < mean.size(); ++j) {
                const double s2 = sd[j] * sd[j];
                const double m = std::exp(mean[j] + 0.5 * s2);
                mean[j] = m;
                sd[j] = m * std::sqrt(std::expm1(s2));
            }
        }
        return;
    }
    const auto& p = std::get<ParticlePosterior>(belief);
    mean.assign(p.dim, 0.0);
    sd.assign(p.dim, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto row = p.particle(i);
        for (std::size_t j = 0; j < p.dim; ++j) {
            mean[j] += p.weights[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto row = p.particle(i);
        for (std::size_t j = 0; j < p.dim; ++j) {
            const double d = row[j] - mean[j];
            sd[j] += p.weights[i] * d * d;
        }
    }
    for (double& v : sd) {
        v = std::sqrt(v);
    }
}

RunRecord run_sequential(const RunConfig& cfg, std::uint64_t seed)
{
    validate(cfg);
    const Model model = make_model(cfg);
    const PriorSpec prior = make_prior(cfg);
    const TrueProcess truth = make_truth(cfg);
    const DesignSpace space = model.design_space();
    const Rng base(seed);
    EigConfig eig_cfg = cfg.eig;
    eig_cfg.omega = cfg.omega;

    RunRecord rec;
    rec.seed = seed;
    Belief belief = prior;
    ExperimentHistory hist;
    const auto designs = metric_designs(cfg, seed);
    try {
        for (int t = 1; t <= cfg.horizon; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto step = static_cast<std::uint64_t>(t);
            const LossContext ctx = context_for(cfg, model, belief, t, base);

            std::uint64_t calls = 0;
            std::size_t low_ess = 0;
            const EigBatchFn eig_fn = [&](const std::vector<Design>& xs) {
                Rng r = base.derive({kEig, step, calls++});
                auto est = eig_surface(cfg.utility, model, belief, cfg.loss, ctx, xs, eig_cfg, r);
                for (const auto& e : est) {
                    if (e.ess < static_cast<double>(eig_cfg.outer) / 100.0) {
                        ++low_ess;
                    }
                }
                return est;
            };
            Rng acq = base.derive({kAcquire, step});
            const Selection sel = select_design(cfg.acquisition, eig_fn, space, acq);
            if (low_ess > 0) {
                rec.warnings.push_back(fmt::format(
                    "step {}: {} EIG evaluations had importance ESS below N/100", t, low_ess));
            }

            Rng obs = base.derive({kObserve, step});
            const double y = dgp_sample(truth, sel.xi, obs);
            hist.push_back({sel.xi, y, t, resolve_imq(cfg.loss, ctx, sel.xi)});
            belief = fit(cfg, model, prior, hist, belief, t, base);

            StepRecord sr;
            sr.step = t;
            sr.xi = sel.xi;
            sr.eig = sel.eig;
            sr.y = y;
            sr.imq = hist.back().imq;
            belief_summary(belief, sr.post_mean, sr.post_std);
            if (const auto* p = std::get_if<ParticlePosterior>(&belief)) {
                sr.ess = p->ess();
                if (sr.ess < 0.005 * static_cast<double>(p->size())) {
                    rec.warnings.push_back(
                        fmt::format("step {}: particle ESS {:.1f} below 0.5% of particles", t, sr.ess));
                }
            }
            if (cfg.metrics.every_step) {
                Rng mr = base.derive({kMetrics, step});
                sr.metrics = compute_metrics(belief, truth, designs, cfg.metrics.settings, mr);
            }
            sr.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rec.steps.push_back(std::move(sr));
        }
        Rng mr = base.derive({kMetrics, 0});
        rec.final_metrics = compute_metrics(belief, truth, designs, cfg.metrics.settings, mr);
        rec.posterior = belief;
    } catch (const std::exception& e) {
        rec.posterior = belief;
        throw RunFailure(fmt::format("run with seed {} failed at step {}: {}", seed,
                                     rec.steps.size() + 1, e.what()),
                         rec);
    }
    return rec;
}

ExperimentHistory history_of(const RunRecord& record)
{
    ExperimentHistory hist;
    for (const StepRecord& s : record.steps) {
        hist.push_back({s.xi, s.y, s.step, s.imq});
    }
    return hist;
}

ReplayResult replay_inference(const RunConfig& cfg, const ExperimentHistory& dataset,
                              std::uint64_t seed)
{
    if (dataset.empty()) {
        throw std::invalid_argument("replay_inference: empty dataset");
    }
    validate_history(dataset);
    validate(cfg);
    const Model model = make_model(cfg);
    const PriorSpec prior = make_prior(cfg);
    const Rng base(seed);
    Belief belief = prior;
    ExperimentHistory hist;
    for (const Observation& o : dataset) {
        if (o.xi.size() != model.design_dim()) {
            throw std::invalid_argument("replay_inference: design dimension mismatch");
        }
        const LossContext ctx = context_for(cfg, model, belief, o.step, base);
        hist.push_back({o.xi, o.y, o.step, resolve_imq(cfg.loss, ctx, o.xi)});
        belief = fit(cfg, model, prior, hist, belief, o.step, base);
    }
    return {recompute_metrics(cfg, seed, belief), belief};
}

MetricReport recompute_metrics(const RunConfig& cfg, std::uint64_t seed, const Belief& posterior)
{
    Rng mr = Rng(seed).derive({kMetrics, 0});
    return compute_metrics(posterior, make_truth(cfg), metric_designs(cfg, seed),
                           cfg.metrics.settings, mr);
}

MetricSummary summarize(const std::vector<double>& values)
{
    if (values.empty()) {
        throw std::invalid_argument("summarize: no values");
    }
    MetricSummary s;
    double sd = 0.0;
    mean_std(values, s.mean, sd);
    s.se = sd / std::sqrt(static_cast<double>(values.size()));
    return s;
}

Aggregate aggregate(const std::vector<RunRecord>& records)
{
    if (records.size() < 2) {
        throw std::invalid_argument("aggregate: need at least two replications");
    }
    Aggregate agg;
    agg.replications = records.size();
    std::vector<double> rmse, mmd, nll;
    for (const RunRecord& r : records) {
        rmse.push_back(r.final_metrics.rmse);
        mmd.push_back(r.final_metrics.mmd);
        nll.push_back(r.final_metrics.nll);
    }
    agg.rmse = summarize(rmse);
    agg.mmd = summarize(mmd);
    agg.nll = summarize(nll);

    const std::size_t steps = records.front().steps.size();
    bool have_steps = true;
    for (const RunRecord& r : records) {
        if (r.steps.size() != steps) {
            have_steps = false;
        }
        for (const StepRecord& s : r.steps) {
            have_steps = have_steps && s.metrics.has_value();
        }
    }
    if (have_steps) {
        for (std::size_t t = 0; t < steps; ++t) {
            std::vector<double> v;
            for (const RunRecord& r : records) {
                v.push_back(r.steps[t].metrics->mmd);
            }
            agg.mmd_by_step.push_back(summarize(v));
        }
    }
    return agg;
}

std::vector<EigEstimate> surface(const RunConfig& cfg, const std::vector<Design>& designs,
                                 std::uint64_t seed)
{
    validate(cfg);
    const Model model = make_model(cfg);
    const Belief prior = make_prior(cfg);
    const Rng base(seed);
    const LossContext ctx = context_for(cfg, model, prior, 1, base);
    EigConfig eig_cfg = cfg.eig;
    eig_cfg.omega = cfg.omega;
    Rng r = base.derive({kSurface});
    return eig_surface(cfg.utility, model, prior, cfg.loss, ctx, designs, eig_cfg, r);
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_steps_csv(const std::filesystem::path& path, const RunRecord& record)
{
    auto out = open_out(path);
    const std::size_t d = record.steps.empty() ? 0 : record.steps.front().xi.size();
    const std::size_t p = record.steps.empty() ? 0 : record.steps.front().post_mean.size();
    const bool with_metrics = !record.steps.empty() && record.steps.front().metrics.has_value();
    out << "step";
    for (std::size_t k = 0; k < d; ++k) {
        out << ",xi_" << k;
    }
    out << ",y,eig,imq_gamma,imq_c,imq_amplitude,ess";
    for (std::size_t k = 0; k < p; ++k) {
        out << ",post_mean_" << k;
    }
    for (std::size_t k = 0; k < p; ++k) {
        out << ",post_std_" << k;
    }
    if (with_metrics) {
        out << ",rmse,mmd,nll";
    }
    out << '\n';
    for (const StepRecord& s : record.steps) {
        out << s.step;
        for (double v : s.xi) {
            out << ',' << format_double(v);
        }
        for (double v : {s.y, s.eig, s.imq.gamma, s.imq.c, s.imq.amplitude, s.ess}) {
            out << ',' << format_double(v);
        }
        for (double v : s.post_mean) {
            out << ',' << format_double(v);
        }
        for (double v : s.post_std) {
            out << ',' << format_double(v);
        }
        if (with_metrics && s.metrics) {
            out << ',' << format_double(s.metrics->rmse) << ',' << format_double(s.metrics->mmd)
                << ',' << format_double(s.metrics->nll);
        }
        out << '\n';
    }
}

json to_json(const MetricReport& r)
{
    return {{"rmse", r.rmse},
            {"mmd", r.mmd},
            {"nll", r.nll},
            {"n", r.n},
            {"designs", r.d},
            {"posterior_draws", r.m},
            {"rmse_per_design", r.rmse_per_design},
            {"mmd_per_design", r.mmd_per_design},
            {"nll_per_design", r.nll_per_design}};
}

json to_json(const Belief& belief)
{
    if (const auto* g = std::get_if<GaussianApprox>(&belief)) {
        return {{"kind", "gaussian"},
                {"mean", g->dist.mean()},
                {"std", g->dist.std()},
                {"log_space", g->log_space},
                {"ordered_rates", g->ordered_rates}};
    }
    const auto& p = std::get<ParticlePosterior>(belief);
    return {{"kind", "particles"}, {"size", p.size()}, {"ess", p.ess()}};
}

Belief belief_from_json(const json& doc)
{
    if (doc.at("kind").get<std::string>() != "gaussian") {
        throw std::invalid_argument("only Gaussian posteriors are stored in full");
    }
    return GaussianApprox{DiagGaussian(doc.at("mean").get<std::vector<double>>(),
                                       doc.at("std").get<std::vector<double>>()),
                          doc.at("log_space").get<bool>(), doc.at("ordered_rates").get<bool>()};
}

void write_record_json(const std::filesystem::path& path, const RunConfig& cfg,
                       const RunRecord& record)
{
    json doc = {{"seed", record.seed},
                {"label", cfg.label},
                {"config", to_json(cfg)},
                {"steps", record.steps.size()},
                {"metrics", to_json(record.final_metrics)},
                {"posterior", to_json(record.posterior)},
                {"warnings", record.warnings}};
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_aggregate_json(const std::filesystem::path& path, const RunConfig& cfg,
                          const Aggregate& agg)
{
    auto summary = [](const MetricSummary& s) { return json{{"mean", s.mean}, {"se", s.se}}; };
    json traj = json::array();
    for (const MetricSummary& s : agg.mmd_by_step) {
        traj.push_back(summary(s));
    }
    json doc = {{"label", cfg.label},
                {"replications", agg.replications},
                {"seeds", cfg.seeds},
                {"rmse", summary(agg.rmse)},
                {"mmd", summary(agg.mmd)},
                {"nll", summary(agg.nll)},
                {"mmd_by_step", traj}};
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

void write_surface_csv(const std::filesystem::path& path, const std::vector<Design>& designs,
                       const std::vector<EigEstimate>& estimates)
{
    if (designs.size() != estimates.size() || designs.empty()) {
        throw std::invalid_argument("write_surface_csv: mismatched inputs");
    }
    auto out = open_out(path);
    for (std::size_t k = 0; k < designs.front().size(); ++k) {
        out << "xi_" << k << ',';
    }
    out << "eig,ess\n";
    for (std::size_t i = 0; i < designs.size(); ++i) {
        for (double v : designs[i]) {
            out << format_double(v) << ',';
        }
        out << format_double(estimates[i].value) << ',' << format_double(estimates[i].ess) << '\n';
    }
}

ExperimentHistory read_dataset_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read dataset " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("dataset " + path.string() + " is empty");
    }
    const auto header = split_csv_line(line);
    int step_col = -1;
    int y_col = -1;
    int gamma_col = -1;
    int c_col = -1;
    int amp_col = -1;
    std::vector<int> xi_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        const int c = static_cast<int>(i);
        if (h == "step") {
            step_col = c;
        } else if (h == "y") {
            y_col = c;
        } else if (h.rfind("xi_", 0) == 0) {
            xi_cols.push_back(c);
        } else if (h == "imq_gamma") {
            gamma_col = c;
        } else if (h == "imq_c") {
            c_col = c;
        } else if (h == "imq_amplitude") {
            amp_col = c;
        }
    }
    if (step_col < 0 || y_col < 0 || xi_cols.empty()) {
        throw std::runtime_error("dataset needs step, xi_*, and y columns");
    }
    ExperimentHistory hist;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split_csv_line(line);
        Observation o;
        o.step = std::stoi(cells.at(step_col));
        o.y = std::stod(cells.at(y_col));
        for (int c : xi_cols) {
            o.xi.push_back(std::stod(cells.at(c)));
        }
        if (gamma_col >= 0 && c_col >= 0) {
            o.imq.gamma = std::stod(cells.at(gamma_col));
            o.imq.c = std::stod(cells.at(c_col));
            if (amp_col >= 0) {
                o.imq.amplitude = std::stod(cells.at(amp_col));
            }
        }
        hist.push_back(std::move(o));
    }
    validate_history(hist);
    return hist;
}

}  // namespace gboed
