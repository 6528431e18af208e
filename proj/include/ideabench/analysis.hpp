#pragma once

// Read-only analyses over finished runs: per-strategy summaries, the
// cross-task regression (least squares through the origin) and Pearson
// correlation, score densities, per-category profiles and reasoning-token
// tables. Everything is a pure function of the record logs and is emitted
// as CSV plus a plain-text report; plotting is left to external tools.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ideabench/bench.hpp"
#include "ideabench/core.hpp"
#include "ideabench/util.hpp"

namespace ideabench::analysis {

class ZeroVarianceError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Summaries

struct ModelSummary {
    std::string strategy_id;
    int count = 0;  // questions
    double mean = 0.0;
    double min_score = 0.0;
    double max_score = 0.0;
    std::map<std::string, double> per_category_means;
    std::optional<double> mean_reasoning_tokens;  // nullopt = provider reported none ("unreported")
    int capped_chains = 0;                        // chains cut by the step cap, flagged loudly in reports
};

inline ModelSummary summarize(const bench::RunState& run, const std::string& strategy_id) {
    auto missing = run.unfinished(strategy_id);
    if (!missing.empty())
        throw bench::IncompleteRunError("strategy \"" + strategy_id + "\" has " + std::to_string(missing.size()) +
                                        " unfinished chains (first: " + missing.front() + ")");
    const auto& chains = run.strategy_chains(strategy_id);
    ModelSummary s;
    s.strategy_id = strategy_id;
    s.count = static_cast<int>(run.questions.size());
    double total = 0.0;
    long long reasoning_total = 0, responses = 0;
    bool any_reported = false;
    bool first = true;
    for (const auto& q : run.questions) {
        const auto& chain = chains.at(q.id);
        int score = bench::question_score(chain);
        total += score;
        if (first || score < s.min_score) s.min_score = score;
        if (first || score > s.max_score) s.max_score = score;
        first = false;
        s.capped_chains += bench::chain_capped(chain) ? 1 : 0;
        for (const auto& rec : chain.records) {
            reasoning_total += rec.reasoning_tokens;
            responses += 1;
            any_reported = any_reported || rec.reasoning_tokens > 0;
        }
    }
    s.mean = s.count ? total / s.count : 0.0;
    if (any_reported && responses > 0)
        s.mean_reasoning_tokens = static_cast<double>(reasoning_total) / static_cast<double>(responses);
    s.per_category_means = bench::per_category_means(chains, run.questions);
    return s;
}

// ---------------------------------------------------------------------------
// Cross-task regression

struct CrossTaskPoint {
    std::string model_id;
    double general_mean = 0.0;     // x
    double scientific_mean = 0.0;  // y
};

/// Zero-intercept least squares: slope = sum(x*y) / sum(x^2).
inline double fit_through_origin(const std::vector<CrossTaskPoint>& points) {
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : points) {
        sxy += p.general_mean * p.scientific_mean;
        sxx += p.general_mean * p.general_mean;
    }
    if (points.empty() || sxx == 0.0)
        throw ValidationError("fit_through_origin: needs at least one point with nonzero x");
    return sxy / sxx;
}

/// Product-moment correlation of the two axes.
inline double pearson_r(const std::vector<CrossTaskPoint>& points) {
    const std::size_t n = points.size();
    if (n < 2) throw ValidationError("pearson_r: needs at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.general_mean;
        my += p.scientific_mean;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (const auto& p : points) {
        double dx = p.general_mean - mx, dy = p.scientific_mean - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ZeroVarianceError("pearson_r: zero variance on one axis");
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Distributions and profiles

struct HistogramBin {
    double lower = 0.0;
    double density = 0.0;
};

/// Normalized histogram of question scores: densities integrate to 1 over
/// the emitted bins. Bins are contiguous from the lowest to the highest
/// occupied bin; bin k covers [k*w, (k+1)*w).
inline std::vector<HistogramBin> score_histogram(const bench::RunState& run, const std::string& strategy_id,
                                                 double bin_width) {
    if (bin_width <= 0.0) throw ValidationError("score_histogram: bin_width must be positive");
    auto missing = run.unfinished(strategy_id);
    if (!missing.empty())
        throw bench::IncompleteRunError("strategy \"" + strategy_id + "\" is not complete");
    const auto& chains = run.strategy_chains(strategy_id);
    std::vector<long long> bins_of_scores;
    for (const auto& q : run.questions)
        bins_of_scores.push_back(
            static_cast<long long>(std::floor(bench::question_score(chains.at(q.id)) / bin_width)));
    auto [lo_it, hi_it] = std::minmax_element(bins_of_scores.begin(), bins_of_scores.end());
    long long lo = *lo_it, hi = *hi_it;
    std::vector<HistogramBin> out(static_cast<std::size_t>(hi - lo + 1));
    for (long long b = lo; b <= hi; ++b) out[static_cast<std::size_t>(b - lo)].lower = b * bin_width;
    double norm = 1.0 / (static_cast<double>(bins_of_scores.size()) * bin_width);
    for (long long b : bins_of_scores) out[static_cast<std::size_t>(b - lo)].density += norm;
    return out;
}

/// Mean score per category; Physics is reported by subdomain.
inline std::map<std::string, double> domain_profile(const bench::RunState& run, const std::string& strategy_id) {
    auto missing = run.unfinished(strategy_id);
    if (!missing.empty())
        throw bench::IncompleteRunError("strategy \"" + strategy_id + "\" is not complete");
    return bench::per_category_means(run.strategy_chains(strategy_id), run.questions);
}

/// The strategies to feature in per-domain profile comparisons: group
/// single-model strategies by their underlying base model (provider-side
/// model_name, so reasoning variants of one model collapse together), keep
/// each group's best-scoring configuration, rank by mean, take the top n.
/// Ensemble strategies are not candidates here.
inline std::vector<std::string> top_distinct_strategies(const bench::RunState& run, std::size_t n = 5) {
    std::map<std::string, std::pair<std::string, double>> best_of_group;  // base -> (strategy, mean)
    for (const auto& sc : run.config.strategies) {
        if (sc.kind != core::StrategyConfig::Kind::single) continue;
        std::string base = sc.model;
        for (const auto& m : run.config.models)
            if (m.model_id == sc.model && !m.model_name.empty()) base = m.model_name;
        double mean = summarize(run, sc.id).mean;
        auto it = best_of_group.find(base);
        if (it == best_of_group.end() || mean > it->second.second) best_of_group[base] = {sc.id, mean};
    }
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& [base, entry] : best_of_group) ranked.push_back(entry);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (ranked.size() > n) ranked.resize(n);
    std::vector<std::string> out;
    for (const auto& [sid, mean] : ranked) out.push_back(sid);
    return out;
}

struct TokenRow {
    std::string strategy_id;
    std::optional<double> mean_reasoning_tokens;  // nullopt = unreported
    double mean_score = 0.0;
};

/// Reasoning-token usage next to benchmark score, one row per strategy.
/// Strategies whose provider never reported reasoning tokens are labeled
/// unreported rather than shown as zero.
inline std::vector<TokenRow> token_report(const bench::RunState& run) {
    std::vector<TokenRow> rows;
    for (const auto& sc : run.config.strategies) {
        auto s = summarize(run, sc.id);
        rows.push_back({sc.id, s.mean_reasoning_tokens, s.mean});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV input/output

inline void write_summary_csv(std::ostream& out, const std::vector<ModelSummary>& summaries) {
    out << "strategy_id,count,mean,min,max,mean_reasoning_tokens,capped_chains\n";
    for (const auto& s : summaries) {
        out << util::csv_field(s.strategy_id) << ',' << s.count << ',' << s.mean << ',' << s.min_score << ','
            << s.max_score << ','
            << (s.mean_reasoning_tokens ? std::to_string(*s.mean_reasoning_tokens) : "unreported") << ','
            << s.capped_chains << '\n';
    }
}

inline void write_cross_task_csv(std::ostream& out, const std::vector<CrossTaskPoint>& points) {
    out << "model_id,general_mean,scientific_mean\n";
    for (const auto& p : points)
        out << util::csv_field(p.model_id) << ',' << p.general_mean << ',' << p.scientific_mean << '\n';
}

inline void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins, double bin_width) {
    out << "bin_lower,bin_width,density\n";
    for (const auto& b : bins) out << b.lower << ',' << bin_width << ',' << b.density << '\n';
}

inline void write_profile_csv(std::ostream& out, const std::map<std::string, double>& profile) {
    out << "category,mean_score\n";
    for (const auto& [cat, mean] : profile) out << util::csv_field(cat) << ',' << mean << '\n';
}

inline void write_token_csv(std::ostream& out, const std::vector<TokenRow>& rows) {
    out << "strategy_id,mean_reasoning_tokens,mean_score\n";
    for (const auto& r : rows)
        out << util::csv_field(r.strategy_id) << ','
            << (r.mean_reasoning_tokens ? std::to_string(*r.mean_reasoning_tokens) : "unreported") << ','
            << r.mean_score << '\n';
}

/// model_id -> general-creativity mean, from a CSV with header
/// "model_id,general_mean".
inline std::map<std::string, double> load_general_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV: " + path.string());
    std::map<std::string, double> out;
    std::string line;
    int line_no = 0;
    std::size_t id_col = 0, mean_col = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        auto fields = util::parse_csv_line(line);
        if (line_no == 1) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "model_id") id_col = i;
                if (fields[i] == "general_mean") mean_col = i;
            }
            continue;
        }
        if (fields.size() <= std::max(id_col, mean_col))
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": too few columns");
        out[fields[id_col]] = std::stod(fields[mean_col]);
    }
    if (out.empty()) throw ParseError(path.string() + ": no data rows");
    return out;
}

struct LabeledPoint {
    CrossTaskPoint point;
    std::string kind;  // "individual" or "ensemble"
};

/// Rows of a two-axis CSV with header
/// "model_id,kind,general_mean,scientific_mean" (kind optional, defaults to
/// individual).
inline std::vector<LabeledPoint> load_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV: " + path.string());
    std::vector<LabeledPoint> out;
    std::string line;
    int line_no = 0;
    std::map<std::string, std::size_t> cols;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        auto fields = util::parse_csv_line(line);
        if (line_no == 1) {
            for (std::size_t i = 0; i < fields.size(); ++i) cols[fields[i]] = i;
            for (const char* required : {"model_id", "general_mean", "scientific_mean"})
                if (!cols.count(required))
                    throw ParseError(path.string() + ": missing column \"" + required + "\"");
            continue;
        }
        LabeledPoint p;
        p.point.model_id = fields.at(cols["model_id"]);
        p.point.general_mean = std::stod(fields.at(cols["general_mean"]));
        p.point.scientific_mean = std::stod(fields.at(cols["scientific_mean"]));
        p.kind = cols.count("kind") && cols["kind"] < fields.size() ? fields[cols["kind"]] : "individual";
        out.push_back(std::move(p));
    }
    if (out.empty()) throw ParseError(path.string() + ": no data rows");
    return out;
}

// ---------------------------------------------------------------------------
// Text report

inline std::string text_report(const bench::RunState& run, double bin_width = 1.0) {
    std::ostringstream out;
    out << "Run report: " << run.run_id << "\n";
    out << "Questions: " << run.questions.size() << "\n";
    if (auto top = top_distinct_strategies(run); !top.empty())
        out << "Top distinct models: " << util::join(top, ", ") << "\n";
    out << "\n";
    for (const auto& sc : run.config.strategies) {
        auto s = summarize(run, sc.id);
        out << "== " << s.strategy_id << " ==\n";
        out << std::fixed << std::setprecision(3);
        out << "  mean " << s.mean << "  min " << s.min_score << "  max " << s.max_score;
        if (s.capped_chains > 0)
            out << "  [WARNING: " << s.capped_chains
                << " chain(s) hit the step cap; scores are lower bounds]";
        out << "\n";
        out << "  reasoning tokens/response: "
            << (s.mean_reasoning_tokens ? std::to_string(*s.mean_reasoning_tokens) : "unreported") << "\n";
        out << "  category means:\n";
        for (const auto& [cat, mean] : s.per_category_means) out << "    " << cat << ": " << mean << "\n";
        out << "  score density (bin width " << bin_width << "):\n";
        for (const auto& b : score_histogram(run, sc.id, bin_width))
            out << "    [" << b.lower << ", " << b.lower + bin_width << "): " << b.density << "\n";
        out << "\n";
    }
    return out.str();
}

}  // namespace ideabench::analysis
