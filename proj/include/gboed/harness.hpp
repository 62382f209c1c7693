#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gboed/design_opt.hpp"
#include "gboed/dgp.hpp"
#include "gboed/eig.hpp"
#include "gboed/inference.hpp"
#include "gboed/losses.hpp"
#include "gboed/metrics.hpp"
#include "gboed/models.hpp"

namespace gboed {

enum class ProblemKind { LinearRegression, Pharmacokinetic, LocationFinding };

struct ProblemSpec {
    ProblemKind kind = ProblemKind::LinearRegression;
    std::size_t dim = 2;    // location finding only
    std::size_t truth = 0;  // index into the regression truths
};

enum class Backend { Snis, Variational };

struct InferenceSettings {
    Backend backend = Backend::Variational;
    std::size_t particles = 10000;
    VariationalConfig variational{};
    bool warm_start = true;
    /// parameter draws behind the frozen predictive summary of each step
    std::size_t context_samples = 1000;
    double kernel_amplitude = 1.0;
};

struct MetricConfig {
    MetricSettings settings{};
    /// evaluation designs for PK and LF; LR always uses the 100-point grid
    std::size_t n_designs = 500;
    bool every_step = false;
};

struct RunConfig {
    std::string label = "run";
    ProblemSpec problem{};
    Scenario scenario = WellSpecified{};
    LossSpec loss{};
    double omega = 1.0;
    Utility utility = Utility::Gibbs;
    AcquisitionSpec acquisition = GridAcquisition{100};
    InferenceSettings inference{};
    int horizon = 10;
    EigConfig eig{};
    MetricConfig metrics{};
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "runs";
};

/// Problem-level defaults (horizon, omega, loss schedule, acquisition) at full budget.
RunConfig default_config(const ProblemSpec& problem, const Scenario& scenario = WellSpecified{});

/// Keys absent from the document keep the problem defaults.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

/// "a..b" (inclusive) or a single integer.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

Model make_model(const RunConfig& cfg);
TrueProcess make_truth(const RunConfig& cfg);
PriorSpec make_prior(const RunConfig& cfg);

/// Fixed evaluation designs of a run (LR grid, else frozen uniform draws).
std::vector<Design> metric_designs(const RunConfig& cfg, std::uint64_t seed);

struct StepRecord {
    int step = 0;
    Design xi;
    double eig = 0.0;
    double y = 0.0;
    ImqParams imq{};
    std::vector<double> post_mean;
    std::vector<double> post_std;
    double ess = 0.0;  // particle ESS; 0 for Gaussian beliefs
    double seconds = 0.0;
    std::optional<MetricReport> metrics;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    MetricReport final_metrics{};
    Belief posterior = GaussianApprox{};
    std::vector<std::string> warnings;
};

/// Raised when a run aborts; carries the steps completed so far.
class RunFailure : public std::runtime_error {
public:
    RunFailure(const std::string& what, RunRecord partial)
        : std::runtime_error(what), partial_(std::move(partial))
    {
    }
    const RunRecord& partial() const { return partial_; }

private:
    RunRecord partial_;
};

RunRecord run_sequential(const RunConfig& cfg, std::uint64_t seed);

ExperimentHistory history_of(const RunRecord& record);

struct ReplayResult {
    MetricReport metrics;
    Belief posterior;
};

/// Sequential inference over a fixed dataset (contexts recomputed point by point), then metrics.
ReplayResult replay_inference(const RunConfig& cfg, const ExperimentHistory& dataset,
                              std::uint64_t seed);

/// Metrics of a stored posterior, with the same keyed streams as the run.
MetricReport recompute_metrics(const RunConfig& cfg, std::uint64_t seed, const Belief& posterior);

struct MetricSummary {
    double mean = 0.0;
    double se = 0.0;
};

struct Aggregate {
    std::size_t replications = 0;
    MetricSummary rmse;
    MetricSummary mmd;
    MetricSummary nll;
    /// per-step mmd trajectory, present when every record has per-step metrics
    std::vector<MetricSummary> mmd_by_step;
};

MetricSummary summarize(const std::vector<double>& values);
Aggregate aggregate(const std::vector<RunRecord>& records);

/// Utility at the given designs under the prior (step-1 context).
std::vector<EigEstimate> surface(const RunConfig& cfg, const std::vector<Design>& designs,
                                 std::uint64_t seed);

// Persistence. Floats in CSV use 17 significant digits.
std::string format_double(double v);
void write_steps_csv(const std::filesystem::path& path, const RunRecord& record);
void write_record_json(const std::filesystem::path& path, const RunConfig& cfg,
                       const RunRecord& record);
void write_aggregate_json(const std::filesystem::path& path, const RunConfig& cfg,
                          const Aggregate& agg);
void write_surface_csv(const std::filesystem::path& path, const std::vector<Design>& designs,
                       const std::vector<EigEstimate>& estimates);
nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const Belief& belief);
Belief belief_from_json(const nlohmann::json& doc);

/// Columns: step, xi_0.., y, optionally imq_gamma, imq_c, imq_amplitude. Extra columns are ignored.
ExperimentHistory read_dataset_csv(const std::filesystem::path& path);

/// Posterior mean and std of theta (log-normal moments for log-space Gaussians).
void belief_summary(const Belief& belief, std::vector<double>& mean, std::vector<double>& std);

}  // namespace gboed
