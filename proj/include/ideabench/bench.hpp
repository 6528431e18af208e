#pragma once

// The benchmark loop. For each (strategy, question) pair: generate a
// candidate, score it (coherence first, novelty skipped when coherence
// already terminates), append one record, stop on any termination reason.
// A question's score is its count of accepted records.
//
// Persistence is event-sourced: the per-strategy record logs are append-only
// JSONL files and replaying them reconstructs run state exactly, which is
// what makes kill-and-resume safe. A run directory holds one config
// snapshot, one record log per strategy, the embedding cache and a summary:
//
//   <run_dir>/config.json
//   <run_dir>/<strategy_id>.records.jsonl     (header line, then records)
//   <run_dir>/cache/
//   <run_dir>/summary.txt
//   <run_dir>/.lock                           (held while a run is active)

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <json.hpp>

#include "ideabench/clients.hpp"
#include "ideabench/config.hpp"
#include "ideabench/core.hpp"
#include "ideabench/ensembles.hpp"
#include "ideabench/scoring.hpp"
#include "ideabench/sources.hpp"

namespace ideabench::bench {

using json = nlohmann::json;

class ConfigMismatchError : public Error {
public:
    using Error::Error;
};
class IncompleteRunError : public Error {
public:
    using Error::Error;
};
class LockedError : public Error {
public:
    using Error::Error;
};

/// Control-flow signal used by crash-injection hooks; deliberately not a
/// std::exception so per-chain error handling cannot swallow it.
struct StopRun {};

inline constexpr std::string_view kLogVersion = "v1";
inline constexpr std::string_view kLogSuffix = ".records.jsonl";

struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path config() const { return dir / "config.json"; }
    std::filesystem::path log(const std::string& strategy_id) const {
        return dir / (strategy_id + std::string(kLogSuffix));
    }
    std::filesystem::path cache() const { return dir / "cache"; }
    std::filesystem::path summary() const { return dir / "summary.txt"; }
    std::filesystem::path lock() const { return dir / ".lock"; }
};

// ---------------------------------------------------------------------------
// Record log

/// Append-only JSONL writer for one strategy. First line is a header tagged
/// with the schema version; every subsequent line is one IdeaRecord. Appends
/// are flushed immediately and serialized internally.
class RecordLog {
public:
    RecordLog(std::filesystem::path path, std::string strategy_id)
        : path_(std::move(path)), strategy_id_(std::move(strategy_id)) {
        bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
        out_.open(path_, std::ios::app);
        if (!out_) throw Error("cannot open record log for append: " + path_.string());
        if (fresh) {
            json header = {{"v", kLogVersion}, {"kind", "record_log"}, {"strategy", strategy_id_}};
            out_ << header.dump() << '\n';
            out_.flush();
        }
    }

    const std::string& strategy_id() const { return strategy_id_; }

    void append(const core::IdeaRecord& rec) {
        std::lock_guard lock(mu_);
        out_ << rec.to_json().dump() << '\n';
        out_.flush();
        if (!out_) throw Error("write failed on record log: " + path_.string());
    }

    /// Read a log back. A trailing partial line (torn final write) is
    /// dropped; anything else malformed is an error.
    static std::vector<core::IdeaRecord> replay(const std::filesystem::path& path,
                                                std::string* strategy_out = nullptr) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open record log: " + path.string());
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bool ends_with_newline = !content.empty() && content.back() == '\n';
        auto lines = util::split_lines(content);
        if (!lines.empty() && lines.back().empty()) lines.pop_back();
        if (lines.empty()) throw ParseError(path.string() + ": missing log header");
        json header;
        try {
            header = json::parse(lines.front());
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":1: bad log header: " + e.what());
        }
        if (header.value("v", "") != kLogVersion)
            throw ParseError(path.string() + ": unsupported log version " + header.value("v", "<none>"));
        if (strategy_out) *strategy_out = header.value("strategy", "");
        std::vector<core::IdeaRecord> records;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            if (util::trim(lines[i]).empty()) continue;
            try {
                records.push_back(core::IdeaRecord::from_json(json::parse(lines[i])));
            } catch (const std::exception& e) {
                if (i + 1 == lines.size() && !ends_with_newline) break;  // torn final write
                throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": bad record: " + e.what());
            }
        }
        return records;
    }

private:
    std::filesystem::path path_;
    std::string strategy_id_;
    std::ofstream out_;
    std::mutex mu_;
};

/// Group replayed records into chains and re-check the chain invariants.
inline std::map<std::string, core::ChainState> chains_from_records(const std::string& strategy_id,
                                                                   const std::vector<core::IdeaRecord>& records) {
    std::map<std::string, core::ChainState> chains;
    for (const auto& rec : records) {
        auto& chain = chains[rec.question_id];
        chain.strategy_id = strategy_id;
        chain.question_id = rec.question_id;
        chain.records.push_back(rec);
    }
    for (auto& [qid, chain] : chains) {
        std::sort(chain.records.begin(), chain.records.end(),
                  [](const core::IdeaRecord& a, const core::IdeaRecord& b) { return a.step_index < b.step_index; });
        for (std::size_t i = 0; i < chain.records.size(); ++i) {
            if (chain.records[i].step_index != static_cast<int>(i))
                throw ParseError("chain " + strategy_id + "/" + qid + ": step indices not consecutive from 0");
            bool last = i + 1 == chain.records.size();
            if (!last && chain.records[i].termination_reason != core::TerminationReason::none)
                throw ParseError("chain " + strategy_id + "/" + qid + ": termination record is not final");
        }
        chain.status = !chain.records.empty() &&
                               chain.records.back().termination_reason != core::TerminationReason::none
                           ? core::ChainStatus::terminated
                           : core::ChainStatus::running;
    }
    return chains;
}

// ---------------------------------------------------------------------------
// Scoring adapter

/// Scores one candidate against a chain. Coherence is judged first; when it
/// already terminates, the novelty calls are skipped entirely and recorded
/// as absent.
struct Scorer {
    clients::Embedder& embedder;
    scoring::Judge& judge;

    struct Scores {
        std::optional<double> embed_novelty;
        std::optional<double> llm_novelty;
        double coherence = 0.0;
    };

    Scores score_candidate(const core::Question& question, const std::string& candidate,
                           const std::vector<std::string>& accepted, const core::Thresholds& thresholds) {
        Scores s;
        s.coherence = judge.coherence(question.text, candidate);
        if (s.coherence < thresholds.tau_coherence) return s;
        std::vector<std::vector<double>> priors;
        priors.reserve(accepted.size());
        for (const auto& a : accepted) priors.push_back(embedder.embed(a));
        s.embed_novelty = scoring::embedding_novelty(embedder.embed(candidate), priors);
        s.llm_novelty = judge.llm_novelty(question.text, candidate, accepted);
        return s;
    }
};

// ---------------------------------------------------------------------------
// The chain loop

using RecordSink = std::function<void(const core::IdeaRecord&)>;

/// Run (or resume) one question's chain to termination. `resume_from` may
/// carry records replayed from a log; they must all be accepted, which is
/// what replay yields for a chain that has not terminated.
inline core::ChainState run_question(IdeaSource& source, const core::Question& question,
                                     const core::Thresholds& thresholds, Scorer& scorer,
                                     const RecordSink& sink = {}, core::ChainState resume_from = {}) {
    core::ChainState chain = std::move(resume_from);
    chain.strategy_id = source.strategy_id();
    chain.question_id = question.id;
    if (chain.terminated()) return chain;

    std::vector<std::string> accepted;
    for (const auto& rec : chain.records) {
        if (!rec.accepted)
            throw Error("cannot resume chain " + chain.strategy_id + "/" + question.id +
                        ": non-accepted record in a running chain");
        accepted.push_back(rec.text);
    }

    for (int step = static_cast<int>(chain.records.size());; ++step) {
        auto t0 = std::chrono::steady_clock::now();
        IdeaCandidate candidate = source.next_idea(question, accepted, step);
        Scorer::Scores s = scorer.score_candidate(question, candidate.text, accepted, thresholds);

        core::TerminationReason reason;
        if (!s.embed_novelty) {
            reason = core::TerminationReason::coherence_below;
        } else {
            reason = scoring::should_terminate({*s.embed_novelty, *s.llm_novelty, s.coherence}, thresholds, step);
        }

        core::IdeaRecord rec;
        rec.question_id = question.id;
        rec.step_index = step;
        rec.model_id = candidate.model_id;
        rec.text = candidate.text;
        rec.embed_novelty = s.embed_novelty;
        rec.llm_novelty = s.llm_novelty;
        rec.coherence = s.coherence;
        // The step-cap record passed every threshold, so it stays accepted
        // even though it ends the chain.
        rec.accepted = reason == core::TerminationReason::none || reason == core::TerminationReason::step_cap;
        rec.termination_reason = reason;
        rec.prompt_tokens = candidate.gen.prompt_tokens;
        rec.completion_tokens = candidate.gen.completion_tokens;
        rec.reasoning_tokens = candidate.gen.reasoning_tokens;
        rec.wall_clock_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();

        chain.records.push_back(rec);
        if (sink) sink(rec);
        if (rec.accepted) accepted.push_back(rec.text);
        if (reason != core::TerminationReason::none) {
            chain.status = core::ChainStatus::terminated;
            return chain;
        }
    }
}

/// A question's score: its number of accepted responses.
inline int question_score(const core::ChainState& chain) {
    int n = 0;
    for (const auto& rec : chain.records) n += rec.accepted ? 1 : 0;
    return n;
}

inline bool chain_capped(const core::ChainState& chain) {
    return !chain.records.empty() &&
           chain.records.back().termination_reason == core::TerminationReason::step_cap;
}

// ---------------------------------------------------------------------------
// Run state

struct ChainFailure {
    std::string strategy_id;
    std::string question_id;
    std::string error;
};

struct RunState {
    std::string run_id;
    core::RunConfig config;
    std::vector<core::Question> questions;
    // chains[strategy_id][question_id]
    std::map<std::string, std::map<std::string, core::ChainState>> chains;
    std::vector<ChainFailure> failures;
    bool interrupted = false;

    const std::map<std::string, core::ChainState>& strategy_chains(const std::string& strategy_id) const {
        auto it = chains.find(strategy_id);
        if (it == chains.end()) throw ValidationError("no chains recorded for strategy \"" + strategy_id + "\"");
        return it->second;
    }

    std::vector<std::string> unfinished(const std::string& strategy_id) const {
        std::vector<std::string> out;
        auto it = chains.find(strategy_id);
        for (const auto& q : questions) {
            if (it == chains.end()) {
                out.push_back(q.id);
                continue;
            }
            auto cit = it->second.find(q.id);
            if (cit == it->second.end() || !cit->second.terminated()) out.push_back(q.id);
        }
        return out;
    }

    bool complete(const std::string& strategy_id) const { return unfinished(strategy_id).empty(); }
};

/// Arithmetic mean of question scores for one strategy across the dataset.
inline double mean_score(const RunState& run, const std::string& strategy_id) {
    auto missing = run.unfinished(strategy_id);
    if (!missing.empty())
        throw IncompleteRunError("strategy \"" + strategy_id + "\" has " + std::to_string(missing.size()) +
                                 " unfinished chains (first: " + missing.front() + ")");
    const auto& chains = run.strategy_chains(strategy_id);
    double total = 0.0;
    for (const auto& q : run.questions) total += question_score(chains.at(q.id));
    return run.questions.empty() ? 0.0 : total / static_cast<double>(run.questions.size());
}

/// Mean question score per category (Physics split by subdomain).
inline std::map<std::string, double> per_category_means(const std::map<std::string, core::ChainState>& chains,
                                                        const std::vector<core::Question>& questions) {
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const auto& q : questions) {
        auto it = chains.find(q.id);
        int score = it != chains.end() ? question_score(it->second) : 0;
        sums[q.category()] += score;
        counts[q.category()] += 1;
    }
    std::map<std::string, double> means;
    for (const auto& [cat, sum] : sums) means[cat] = sum / counts[cat];
    return means;
}

// ---------------------------------------------------------------------------
// Directory lock

/// Advisory lock held while a run writes a directory. Readers (score,
/// analyze, report) refuse to touch a locked directory. A lock whose owner
/// process is gone is stale and silently replaced.
class DirectoryLock {
public:
    explicit DirectoryLock(std::filesystem::path lock_path) : path_(std::move(lock_path)) {
        if (auto owner = lock_owner(path_))
            throw LockedError("run directory is locked by running pid " + std::to_string(*owner) + " (" +
                              path_.string() + ")");
        std::error_code ec;
        std::filesystem::remove(path_, ec);
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw LockedError("cannot create lock file: " + path_.string());
        std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        held_ = true;
    }

    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

    ~DirectoryLock() { release(); }

    void release() {
        if (!held_) return;
        std::error_code ec;
        std::filesystem::remove(path_, ec);
        held_ = false;
    }

    /// Pid currently holding the lock, if that process is still alive.
    static std::optional<int> lock_owner(const std::filesystem::path& lock_path) {
        std::ifstream in(lock_path);
        if (!in) return std::nullopt;
        int pid = 0;
        in >> pid;
        if (pid <= 0) return std::nullopt;
        if (::kill(pid, 0) != 0) return std::nullopt;  // owner is gone, lock is stale
        return pid;
    }

private:
    std::filesystem::path path_;
    bool held_ = false;
};

// ---------------------------------------------------------------------------
// Replay and canonicalization

/// Reconstruct run state from a run directory without executing anything.
inline RunState replay_run(const std::filesystem::path& run_dir) {
    RunPaths paths{run_dir};
    RunState state;
    state.run_id = run_dir.filename().string();
    state.config = core::RunConfig::load(paths.config());
    state.questions = core::load_questions(state.config.dataset);
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        auto name = entry.path().filename().string();
        if (name.size() <= kLogSuffix.size() || !name.ends_with(kLogSuffix)) continue;
        std::string strategy_id;
        auto records = RecordLog::replay(entry.path(), &strategy_id);
        if (strategy_id.empty()) strategy_id = name.substr(0, name.size() - kLogSuffix.size());
        state.chains[strategy_id] = chains_from_records(strategy_id, records);
    }
    return state;
}

/// Canonical form of a run's records for determinism comparisons: volatile
/// fields (wall clock) dropped, records sorted by (strategy, question,
/// step). Two runs with identical logic produce identical canonical text no
/// matter how their threads interleaved.
inline std::string canonical_records(const std::map<std::string, std::map<std::string, core::ChainState>>& chains) {
    std::vector<std::string> lines;
    for (const auto& [strategy, by_question] : chains)
        for (const auto& [qid, chain] : by_question)
            for (const auto& rec : chain.records) {
                json j = rec.to_json();
                j.erase("wall_clock_ms");
                lines.push_back(strategy + "\t" + j.dump());
            }
    std::sort(lines.begin(), lines.end());
    return util::join(lines, "\n");
}

inline std::string canonical_run_log(const std::filesystem::path& run_dir) {
    return canonical_records(replay_run(run_dir).chains);
}

// ---------------------------------------------------------------------------
// Strategy factory

inline ensembles::CategoryScores per_category_scores(const RunState& run,
                                                     const std::vector<std::string>& strategy_filter = {}) {
    ensembles::CategoryScores scores;
    for (const auto& [strategy_id, chains] : run.chains) {
        if (!strategy_filter.empty() &&
            std::find(strategy_filter.begin(), strategy_filter.end(), strategy_id) == strategy_filter.end())
            continue;
        for (const auto& [cat, mean] : per_category_means(chains, run.questions)) scores[cat][strategy_id] = mean;
    }
    return scores;
}

inline std::vector<std::unique_ptr<IdeaSource>> build_sources(const core::RunConfig& config,
                                                              clients::ClientSet& clients,
                                                              const std::vector<core::Question>& questions) {
    std::vector<std::unique_ptr<IdeaSource>> sources;
    std::set<std::string> ids;
    auto require_model = [&](const std::string& strategy, const std::string& model_id) {
        if (!clients.has(model_id))
            throw ValidationError("strategy \"" + strategy + "\" references unknown model \"" + model_id + "\"");
    };
    for (const auto& sc : config.strategies) {
        if (!ids.insert(sc.id).second) throw ValidationError("duplicate strategy id \"" + sc.id + "\"");
        switch (sc.kind) {
            case core::StrategyConfig::Kind::single: {
                require_model(sc.id, sc.model);
                sources.push_back(std::make_unique<SingleModelSource>(clients, sc.model, config.prompts, sc.id));
                break;
            }
            case core::StrategyConfig::Kind::router: {
                ensembles::RouterTable table;
                if (!sc.router_table.empty()) {
                    table.assignment = sc.router_table;
                } else {
                    auto prior = replay_run(sc.derive_from_run);
                    table = ensembles::build_router(per_category_scores(prior, sc.constituents));
                }
                for (const auto& [cat, model] : table.assignment) require_model(sc.id, model);
                for (const auto& q : questions) ensembles::route(table, q);  // fail fast on gaps
                sources.push_back(
                    std::make_unique<ensembles::RouterSource>(clients, std::move(table), sc.id, config.prompts));
                break;
            }
            case core::StrategyConfig::Kind::brainstorm: {
                ensembles::BrainstormConfig bc;
                bc.members = sc.members;
                bc.scheme = sc.scheme == "inverted" ? ensembles::BrainstormScheme::inverted
                                                    : ensembles::BrainstormScheme::proportional;
                bc.seed = config.seed;
                for (const auto& m : sc.members) {
                    require_model(sc.id, m);
                    auto it = sc.member_scores.find(m);
                    if (it == sc.member_scores.end())
                        throw ValidationError("strategy \"" + sc.id + "\": no member_score for \"" + m + "\"");
                    bc.member_scores.push_back(it->second);
                }
                sources.push_back(
                    std::make_unique<ensembles::BrainstormSource>(clients, std::move(bc), sc.id, config.prompts));
                break;
            }
            case core::StrategyConfig::Kind::parallel_select: {
                ensembles::ParallelConfig pc;
                pc.members = sc.members;
                pc.selector = sc.selector;
                pc.seed = config.seed;
                for (const auto& m : sc.members) require_model(sc.id, m);
                require_model(sc.id, sc.selector);
                sources.push_back(
                    std::make_unique<ensembles::ParallelSelectSource>(clients, std::move(pc), sc.id, config.prompts));
                break;
            }
        }
    }
    return sources;
}

// ---------------------------------------------------------------------------
// Full benchmark run

struct RunHooks {
    /// Called after every persisted record with its 1-based global ordinal.
    /// May throw StopRun to simulate a crash.
    std::function<void(const core::IdeaRecord&, std::size_t)> after_append;
    std::function<void(const std::string&)> info;
};

namespace detail {

inline void write_or_check_snapshot(const RunPaths& paths, const core::RunConfig& config) {
    std::string canonical = config.canonical();
    if (std::filesystem::exists(paths.config())) {
        std::ifstream in(paths.config());
        std::string existing((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (existing != canonical) {
            std::vector<std::string> diffs;
            try {
                json a = json::parse(existing), b = json::parse(canonical);
                for (auto& [key, value] : b.items())
                    if (!a.contains(key) || a[key] != value) diffs.push_back(key);
                for (auto& [key, value] : a.items())
                    if (!b.contains(key)) diffs.push_back(key);
            } catch (...) {
            }
            throw ConfigMismatchError(
                "config does not match the snapshot in " + paths.config().string() +
                (diffs.empty() ? "" : " (differs in: " + util::join(diffs, ", ") + ")") +
                "; a run directory is bound to one config");
        }
        return;
    }
    std::ofstream out(paths.config());
    out << canonical;
    if (!out) throw Error("cannot write config snapshot: " + paths.config().string());
}

}  // namespace detail

/// Execute (or resume) every (strategy, question) chain in the config.
/// Cross-question parallelism is bounded by config.concurrency; chains are
/// strictly sequential internally. Progress is persisted after every record,
/// so a killed run resumes by calling this again with the same config:
/// terminated chains are skipped and partial ones continue at their next
/// step. Chains that fail are reported in RunState::failures, never thrown.
inline RunState run_benchmark(const core::RunConfig& config, const RunHooks& hooks = {}) {
    if (config.output_dir.empty()) throw ValidationError("run config needs an output_dir");
    if (config.strategies.empty()) throw ValidationError("run config needs at least one strategy");

    RunPaths paths{config.output_dir};
    std::filesystem::create_directories(paths.dir);
    DirectoryLock lock(paths.lock());
    detail::write_or_check_snapshot(paths, config);

    RunState state;
    state.run_id = paths.dir.filename().string();
    state.config = config;
    state.questions = core::load_questions(config.dataset);

    auto specs = config.models;
    for (const auto& m : specs)
        if (m.model_id == config.judge.model.model_id)
            throw ValidationError("judge model_id \"" + m.model_id + "\" collides with a roster model");
    specs.push_back(config.judge.model);
    clients::ClientSet clients(specs, {}, {});
    clients::Embedder embedder(config.embedder, paths.cache());
    scoring::Judge judge(clients, config.judge);
    Scorer scorer{embedder, judge};

    auto sources = build_sources(config, clients, state.questions);

    struct Task {
        IdeaSource* source;
        const core::Question* question;
        core::ChainState resume_from;
    };
    std::vector<Task> tasks;
    std::map<std::string, std::unique_ptr<RecordLog>> logs;
    for (auto& source : sources) {
        const std::string sid = source->strategy_id();
        std::map<std::string, core::ChainState> existing;
        if (std::filesystem::exists(paths.log(sid)))
            existing = chains_from_records(sid, RecordLog::replay(paths.log(sid)));
        logs.emplace(sid, std::make_unique<RecordLog>(paths.log(sid), sid));
        for (const auto& q : state.questions) {
            auto it = existing.find(q.id);
            if (it != existing.end() && it->second.terminated()) continue;
            tasks.push_back({source.get(), &q, it != existing.end() ? it->second : core::ChainState{}});
        }
        state.chains[sid] = std::move(existing);
    }

    std::atomic<std::size_t> next_task{0};
    std::atomic<std::size_t> appended{0};
    std::atomic<bool> stop{false};
    std::mutex state_mu;

    auto worker = [&] {
        for (std::size_t i = next_task.fetch_add(1); i < tasks.size(); i = next_task.fetch_add(1)) {
            if (stop.load()) return;
            Task& task = tasks[i];
            const std::string sid = task.source->strategy_id();
            RecordLog& log = *logs.at(sid);
            RecordSink sink = [&](const core::IdeaRecord& rec) {
                if (stop.load()) throw StopRun{};
                log.append(rec);
                std::size_t nth = appended.fetch_add(1) + 1;
                if (hooks.after_append) hooks.after_append(rec, nth);
            };
            try {
                auto chain =
                    run_question(*task.source, *task.question, config.thresholds, scorer, sink, task.resume_from);
                std::lock_guard lk(state_mu);
                state.chains[sid][task.question->id] = std::move(chain);
            } catch (const StopRun&) {
                stop.store(true);
                return;
            } catch (const std::exception& e) {
                std::lock_guard lk(state_mu);
                state.failures.push_back({sid, task.question->id, e.what()});
            }
        }
    };

    std::size_t pool = std::max<std::size_t>(1, std::min<std::size_t>(config.concurrency, tasks.size()));
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    state.interrupted = stop.load();

    // The logs are the source of truth; rebuild chains from disk.
    for (auto& [sid, log] : logs) state.chains[sid] = chains_from_records(sid, RecordLog::replay(paths.log(sid)));

    if (!state.interrupted && state.failures.empty()) {
        bool all_complete = true;
        for (const auto& sc : config.strategies) all_complete = all_complete && state.complete(sc.id);
        if (all_complete) {
            std::ofstream out(paths.summary());
            out << "run: " << state.run_id << "\n";
            for (const auto& sc : config.strategies) {
                const auto& chains = state.chains[sc.id];
                int capped = 0;
                for (const auto& [qid, chain] : chains) capped += chain_capped(chain) ? 1 : 0;
                out << sc.id << ": mean=" << mean_score(state, sc.id) << " questions=" << chains.size()
                    << " capped=" << capped << "\n";
            }
        }
    }
    if (hooks.info) {
        hooks.info("run " + state.run_id + ": " + std::to_string(tasks.size()) + " chains processed, " +
                   std::to_string(state.failures.size()) + " failures" +
                   (state.interrupted ? " (interrupted)" : ""));
    }
    return state;
}

}  // namespace ideabench::bench
