// Command-line front end for the benchmark harness.
//
//   ideabench run      --config cfg.json [overrides]     execute a configured run
//   ideabench resume   --run-dir DIR                     continue an interrupted run
//   ideabench score    --run-dir DIR                     recompute summaries from the logs
//   ideabench analyze  --run-dir DIR --general-csv CSV   cross-task regression
//   ideabench analyze  --points-csv CSV                  same, from a two-axis CSV
//   ideabench report   --run-dir DIR                     full text report + CSV exports
//
// Paths inside a config file are resolved against the working directory,
// so resume a run from the directory where it was started.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ideabench/analysis.hpp"
#include "ideabench/bench.hpp"
#include "ideabench/config.hpp"

using namespace ideabench;

namespace {

struct ThresholdOverrides {
    std::optional<double> tau_embed;
    std::optional<double> tau_coherence;
    std::optional<double> tau_llm_novelty;
    std::optional<int> max_steps;
    bool no_max_steps = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--tau-embed", tau_embed, "Embedding-novelty termination threshold (default 0.15)");
        cmd->add_option("--tau-coherence", tau_coherence, "Coherence termination threshold (default 15)");
        cmd->add_option("--tau-llm-novelty", tau_llm_novelty,
                        "Enable the judge-novelty gate at this threshold (off by default)");
        cmd->add_option("--max-steps", max_steps, "Per-question step cap (default 200)");
        cmd->add_flag("--no-max-steps", no_max_steps, "Disable the step cap entirely");
    }

    void apply(core::RunConfig& cfg) const {
        if (tau_embed) cfg.thresholds.tau_embed = *tau_embed;
        if (tau_coherence) cfg.thresholds.tau_coherence = *tau_coherence;
        if (tau_llm_novelty) cfg.thresholds.tau_llm_novelty = *tau_llm_novelty;
        if (max_steps) cfg.thresholds.max_steps = *max_steps;
        if (no_max_steps) cfg.thresholds.max_steps.reset();
    }
};

void refuse_if_locked(const std::filesystem::path& run_dir) {
    if (auto owner = bench::DirectoryLock::lock_owner(bench::RunPaths{run_dir}.lock()))
        throw bench::LockedError("a run is writing this directory (pid " + std::to_string(*owner) +
                                 "); try again when it finishes");
}

int execute_run(core::RunConfig cfg, const std::vector<std::string>& only_strategies) {
    if (!only_strategies.empty()) {
        std::vector<core::StrategyConfig> kept;
        for (const auto& sc : cfg.strategies)
            if (std::find(only_strategies.begin(), only_strategies.end(), sc.id) != only_strategies.end())
                kept.push_back(sc);
        if (kept.size() != only_strategies.size())
            throw ValidationError("--strategy names a strategy that is not in the config");
        cfg.strategies = std::move(kept);
    }
    bench::RunHooks hooks;
    hooks.info = [](const std::string& msg) { std::cout << msg << "\n"; };
    auto state = bench::run_benchmark(cfg, hooks);
    for (const auto& sc : cfg.strategies) {
        if (!state.complete(sc.id)) continue;
        std::cout << sc.id << ": mean score " << bench::mean_score(state, sc.id) << " over "
                  << state.questions.size() << " questions\n";
    }
    if (!state.failures.empty()) {
        std::cerr << state.failures.size() << " chain(s) aborted:\n";
        for (const auto& f : state.failures)
            std::cerr << "  " << f.strategy_id << "/" << f.question_id << ": " << f.error << "\n";
        std::cerr << "State is persisted; continue with:\n  ideabench resume --run-dir " << cfg.output_dir.string()
                  << "\n";
        return 1;
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& output_dir, std::optional<std::uint64_t> seed,
            std::optional<int> concurrency, const ThresholdOverrides& th,
            const std::vector<std::string>& only_strategies) {
    auto cfg = core::RunConfig::load(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (seed) cfg.seed = *seed;
    if (concurrency) cfg.concurrency = *concurrency;
    th.apply(cfg);
    return execute_run(std::move(cfg), only_strategies);
}

int cmd_resume(const std::string& run_dir, const ThresholdOverrides& th) {
    auto cfg = core::RunConfig::load(bench::RunPaths{run_dir}.config());
    cfg.output_dir = run_dir;
    th.apply(cfg);  // any override diverges from the snapshot and is refused
    return execute_run(std::move(cfg), {});
}

int cmd_score(const std::string& run_dir, const std::string& strategy, const std::string& csv_path) {
    refuse_if_locked(run_dir);
    auto state = bench::replay_run(run_dir);
    std::vector<analysis::ModelSummary> summaries;
    for (const auto& sc : state.config.strategies) {
        if (!strategy.empty() && sc.id != strategy) continue;
        summaries.push_back(analysis::summarize(state, sc.id));
    }
    if (summaries.empty()) throw ValidationError("no matching strategy in this run");
    analysis::write_summary_csv(std::cout, summaries);
    for (const auto& s : summaries)
        if (s.capped_chains > 0)
            std::cerr << "note: " << s.strategy_id << " has " << s.capped_chains
                      << " step-capped chain(s); its scores are lower bounds\n";
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        analysis::write_summary_csv(out, summaries);
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

int cmd_analyze(const std::string& run_dir, const std::string& general_csv, const std::string& points_csv,
                bool include_ensembles, const std::string& out_path) {
    std::vector<analysis::CrossTaskPoint> points;
    if (!points_csv.empty()) {
        for (const auto& row : analysis::load_points_csv(points_csv))
            if (include_ensembles || row.kind != "ensemble") points.push_back(row.point);
    } else {
        refuse_if_locked(run_dir);
        auto state = bench::replay_run(run_dir);
        auto general = analysis::load_general_csv(general_csv);
        for (const auto& sc : state.config.strategies) {
            bool is_ensemble = sc.kind != core::StrategyConfig::Kind::single;
            if (is_ensemble && !include_ensembles) continue;
            auto it = general.find(sc.id);
            if (it == general.end()) {
                std::cerr << "note: no general-creativity mean for \"" << sc.id << "\"; skipped\n";
                continue;
            }
            points.push_back({sc.id, it->second, analysis::summarize(state, sc.id).mean});
        }
    }
    double slope = analysis::fit_through_origin(points);
    double r = analysis::pearson_r(points);
    std::cout << "points: " << points.size() << "\n";
    std::cout << "fit through origin: y = " << slope << " x\n";
    std::cout << "pearson r: " << r << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        analysis::write_cross_task_csv(out, points);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_path, double bin_width,
               const std::string& csv_dir) {
    refuse_if_locked(run_dir);
    auto state = bench::replay_run(run_dir);
    auto report = analysis::text_report(state, bin_width);
    std::cout << report;
    std::string target = out_path.empty() ? (bench::RunPaths{run_dir}.dir / "report.txt").string() : out_path;
    std::ofstream(target) << report;
    std::cout << "wrote " << target << "\n";
    if (!csv_dir.empty()) {
        std::filesystem::create_directories(csv_dir);
        std::vector<analysis::ModelSummary> summaries;
        for (const auto& sc : state.config.strategies) summaries.push_back(analysis::summarize(state, sc.id));
        std::ofstream sum(std::filesystem::path(csv_dir) / "summary.csv");
        analysis::write_summary_csv(sum, summaries);
        std::ofstream tok(std::filesystem::path(csv_dir) / "tokens.csv");
        analysis::write_token_csv(tok, analysis::token_report(state));
        for (const auto& sc : state.config.strategies) {
            std::ofstream prof(std::filesystem::path(csv_dir) / ("profile_" + sc.id + ".csv"));
            analysis::write_profile_csv(prof, analysis::domain_profile(state, sc.id));
            std::ofstream hist(std::filesystem::path(csv_dir) / ("histogram_" + sc.id + ".csv"));
            analysis::write_histogram_csv(hist, analysis::score_histogram(state, sc.id, bin_width), bin_width);
        }
        std::cout << "wrote CSV exports to " << csv_dir << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative scientific-ideation benchmark harness"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute a configured benchmark run");
    std::string run_config, run_output;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_concurrency;
    std::vector<std::string> run_strategies;
    ThresholdOverrides run_th;
    run->add_option("--config", run_config, "Run config JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", run_output, "Override the config's output directory");
    run->add_option("--seed", run_seed, "Override the config's random seed");
    run->add_option("--concurrency", run_concurrency, "Max questions processed in parallel");
    run->add_option("--strategy", run_strategies, "Run only these strategy ids (repeatable)");
    run_th.add_flags(run);

    // resume
    auto* resume = app.add_subcommand("resume", "Continue an interrupted run from its directory");
    std::string resume_dir;
    ThresholdOverrides resume_th;
    resume->add_option("--run-dir", resume_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    resume_th.add_flags(resume);

    // score
    auto* score = app.add_subcommand("score", "Recompute summaries from the record logs");
    std::string score_dir, score_strategy, score_csv;
    score->add_option("--run-dir", score_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    score->add_option("--strategy", score_strategy, "Only this strategy id");
    score->add_option("--csv", score_csv, "Also write the summary CSV here");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Cross-task fit and correlation");
    std::string an_dir, an_general, an_points, an_out;
    bool an_include_ensembles = false;
    analyze->add_option("--run-dir", an_dir, "Run directory (scientific axis)")->check(CLI::ExistingDirectory);
    analyze->add_option("--general-csv", an_general, "CSV with model_id,general_mean (general axis)")
        ->check(CLI::ExistingFile);
    analyze->add_option("--points-csv", an_points, "Two-axis CSV: model_id,kind,general_mean,scientific_mean")
        ->check(CLI::ExistingFile);
    analyze->add_flag("--include-ensembles", an_include_ensembles,
                      "Keep ensemble strategies in the fit (excluded by default)");
    analyze->add_option("--out", an_out, "Write the points used as CSV");

    // report
    auto* report = app.add_subcommand("report", "Human-readable report over a finished run");
    std::string rep_dir, rep_out, rep_csv_dir;
    double rep_bin_width = 1.0;
    report->add_option("--run-dir", rep_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", rep_out, "Report path (default <run-dir>/report.txt)");
    report->add_option("--bin-width", rep_bin_width, "Histogram bin width (default 1)");
    report->add_option("--csv-dir", rep_csv_dir, "Also export all analysis CSVs into this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_config, run_output, run_seed, run_concurrency, run_th, run_strategies);
        if (resume->parsed()) return cmd_resume(resume_dir, resume_th);
        if (score->parsed()) return cmd_score(score_dir, score_strategy, score_csv);
        if (analyze->parsed()) {
            if (an_points.empty() && (an_dir.empty() || an_general.empty()))
                throw ValidationError("analyze needs either --points-csv or both --run-dir and --general-csv");
            return cmd_analyze(an_dir, an_general, an_points, an_include_ensembles, an_out);
        }
        if (report->parsed()) return cmd_report(rep_dir, rep_out, rep_bin_width, rep_csv_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
