#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "gboed/harness.hpp"

namespace fs = std::filesystem;
using namespace gboed;

namespace {

fs::path seed_file(const RunConfig& cfg, std::uint64_t seed, const char* suffix)
{
    return fs::path(cfg.output_dir) / fmt::format("seed_{}{}", seed, suffix);
}

void print_report(std::uint64_t seed, const MetricReport& m)
{
    fmt::print("seed {}: rmse {:.6g}  mmd {:.6g}  nll {:.6g}\n", seed, m.rmse, m.mmd, m.nll);
}

int cmd_run(const std::string& config_path, const std::string& seeds, const std::string& out_dir)
{
    RunConfig cfg = load_config(config_path);
    if (!seeds.empty()) {
        cfg.seeds = parse_seed_range(seeds);
    }
    if (!out_dir.empty()) {
        cfg.output_dir = out_dir;
    }
    validate(cfg);
    fs::create_directories(cfg.output_dir);

    std::vector<RunRecord> records;
    for (std::uint64_t seed : cfg.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            RunRecord rec = run_sequential(cfg, seed);
            write_steps_csv(seed_file(cfg, seed, "_steps.csv"), rec);
            write_record_json(seed_file(cfg, seed, ".json"), cfg, rec);
            for (const auto& w : rec.warnings) {
                std::cerr << "warning: seed " << seed << ": " << w << '\n';
            }
            print_report(seed, rec.final_metrics);
            records.push_back(std::move(rec));
        } catch (const RunFailure& e) {
            write_steps_csv(seed_file(cfg, seed, "_steps.partial.csv"), e.partial());
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << fmt::format("seed {} finished in {:.1f}s\n", seed, secs);
    }
    if (records.size() >= 2) {
        const Aggregate agg = aggregate(records);
        write_aggregate_json(fs::path(cfg.output_dir) / "aggregate.json", cfg, agg);
        fmt::print("{} replications: mmd {:.6g} +- {:.3g}  rmse {:.6g} +- {:.3g}  nll {:.6g} +- {:.3g}\n",
                   agg.replications, agg.mmd.mean, agg.mmd.se, agg.rmse.mean, agg.rmse.se,
                   agg.nll.mean, agg.nll.se);
    }
    return 0;
}

int cmd_surface(const std::string& config_path, std::size_t points, const std::string& out)
{
    const RunConfig cfg = load_config(config_path);
    const auto designs = design_grid(make_model(cfg).design_space(), points);
    const auto est = surface(cfg, designs, cfg.seeds.front());
    const fs::path path = out.empty() ? fs::path(cfg.output_dir) / "surface.csv" : fs::path(out);
    write_surface_csv(path, designs, est);
    fmt::print("wrote {} designs to {}\n", designs.size(), path.string());
    return 0;
}

int cmd_replay(const std::string& config_path, const std::string& dataset_path,
               std::optional<std::uint64_t> seed, const std::string& out)
{
    const RunConfig cfg = load_config(config_path);
    const std::uint64_t s = seed.value_or(cfg.seeds.front());
    const ExperimentHistory data = read_dataset_csv(dataset_path);
    const ReplayResult res = replay_inference(cfg, data, s);
    const fs::path path =
        out.empty() ? fs::path(cfg.output_dir) / fmt::format("replay_seed_{}.json", s) : fs::path(out);
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    const nlohmann::json doc = {{"seed", s},
                                {"dataset", fs::path(dataset_path).filename().string()},
                                {"observations", data.size()},
                                {"config", to_json(cfg)},
                                {"metrics", to_json(res.metrics)},
                                {"posterior", to_json(res.posterior)}};
    std::ofstream(path, std::ios::binary) << doc.dump(2) << '\n';
    print_report(s, res.metrics);
    return 0;
}

int cmd_metrics(const std::string& run_dir)
{
    const std::regex name(R"(seed_(\d+)\.json)");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        const std::string f = entry.path().filename().string();
        if (std::regex_match(f, name)) {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        std::cerr << "error: no seed_<n>.json files in " << run_dir << '\n';
        return 1;
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        std::ifstream in(file);
        const auto doc = nlohmann::json::parse(in);
        const RunConfig cfg = parse_config(doc.at("config"));
        const auto seed = doc.at("seed").get<std::uint64_t>();
        MetricReport report;
        if (doc.at("posterior").at("kind") == "gaussian") {
            report = recompute_metrics(cfg, seed, belief_from_json(doc.at("posterior")));
        } else {
            // particle sets are not stored; rebuild them from the logged outcomes
            const fs::path steps = file.parent_path() / fmt::format("seed_{}_steps.csv", seed);
            report = replay_inference(cfg, read_dataset_csv(steps), seed).metrics;
        }
        const fs::path out = file.parent_path() / fmt::format("metrics_seed_{}.json", seed);
        std::ofstream(out, std::ios::binary) << nlohmann::json{{"seed", seed}, {"metrics", to_json(report)}}.dump(2)
                                             << '\n';
        print_report(seed, report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sequential experimental design with Gibbs posteriors"};
    app.require_subcommand(1);

    std::string config;
    std::string seeds;
    std::string out;
    std::string dataset;
    std::string run_dir;
    std::size_t points = 100;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run sequential experiments over a range of seeds");
    run->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    run->add_option("--seeds", seeds, "seed range a..b (overrides the config)");
    run->add_option("--output", out, "output directory (overrides the config)");

    auto* surf = app.add_subcommand("eig-surface", "utility on a design grid under the prior");
    surf->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    surf->add_option("--points", points, "grid points per design dimension")->check(CLI::PositiveNumber);
    surf->add_option("--output", out, "CSV path (default <output_dir>/surface.csv)");

    auto* rep = app.add_subcommand("replay", "sequential inference over a fixed dataset");
    rep->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    rep->add_option("--dataset", dataset, "CSV with step, xi_*, y")->required()->check(CLI::ExistingFile);
    rep->add_option("--seed", seed, "seed (default: first config seed)");
    rep->add_option("--output", out, "JSON path");

    auto* met = app.add_subcommand("metrics", "recompute metrics from a run directory");
    met->add_option("--run-dir", run_dir, "directory written by `run`")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(config, seeds, out);
        }
        if (*surf) {
            return cmd_surface(config, points, out);
        }
        if (*rep) {
            return cmd_replay(config, dataset, seed, out);
        }
        return cmd_metrics(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
