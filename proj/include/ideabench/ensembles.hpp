#pragma once

// Meta-model mechanisms that combine heterogeneous models into one idea
// source:
//
//   Router          — every question goes to the best constituent for its
//                     category (argmax of per-category mean scores).
//   Brainstorm      — k models share one chain; each step samples a member,
//                     proportionally or inverted-proportionally to its
//                     benchmark mean.
//   Parallel-Select — all five members generate candidates concurrently;
//                     an independent selector model picks the continuation
//                     from a shuffled, anonymized list.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ideabench/clients.hpp"
#include "ideabench/core.hpp"
#include "ideabench/sources.hpp"
#include "ideabench/util.hpp"

namespace ideabench::ensembles {

class StepError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Router

/// category key (Question::category() or a bare domain name) -> model_id
using CategoryScores = std::map<std::string, std::map<std::string, double>>;

struct RouterTable {
    std::map<std::string, std::string> assignment;
    CategoryScores provenance;  // the per-category scores the table was built from
};

/// Pick the highest-scoring model per category. Ties break toward the
/// lexicographically smallest model_id so tables are reproducible.
inline RouterTable build_router(const CategoryScores& scores) {
    RouterTable table;
    table.provenance = scores;
    for (const auto& [category, by_model] : scores) {
        if (by_model.empty()) throw ValidationError("router: category \"" + category + "\" has no scored models");
        const std::string* best = nullptr;
        double best_score = 0.0;
        for (const auto& [model_id, score] : by_model) {
            if (!best || score > best_score) {  // map order makes ties lexicographic
                best = &model_id;
                best_score = score;
            }
        }
        table.assignment[category] = *best;
    }
    return table;
}

/// Look up the assigned model for a question. Physics questions try their
/// subdomain key first, then fall back to the bare domain.
inline const std::string& route(const RouterTable& table, const core::Question& question) {
    if (question.subdomain) {
        if (auto it = table.assignment.find(question.category()); it != table.assignment.end())
            return it->second;
    }
    if (auto it = table.assignment.find(to_string(question.domain)); it != table.assignment.end())
        return it->second;
    throw ValidationError("router: no assignment for category \"" + question.category() + "\"");
}

// ---------------------------------------------------------------------------
// Brainstorm

enum class BrainstormScheme { proportional, inverted };

inline const char* to_string(BrainstormScheme s) {
    return s == BrainstormScheme::proportional ? "proportional" : "inverted";
}

struct BrainstormConfig {
    std::vector<std::string> members;    // k unique model ids, k >= 2
    BrainstormScheme scheme = BrainstormScheme::proportional;
    std::vector<double> member_scores;   // strictly positive benchmark means, aligned with members
    std::uint64_t seed = 0;
};

inline void validate(const BrainstormConfig& c) {
    if (c.members.size() < 2) throw ValidationError("brainstorm: needs at least 2 members");
    if (c.member_scores.size() != c.members.size())
        throw ValidationError("brainstorm: member_scores must align with members");
    for (std::size_t i = 0; i < c.members.size(); ++i) {
        if (c.member_scores[i] <= 0.0)
            throw ValidationError("brainstorm: score for \"" + c.members[i] + "\" must be strictly positive");
        for (std::size_t j = i + 1; j < c.members.size(); ++j)
            if (c.members[i] == c.members[j])
                throw ValidationError("brainstorm: duplicate member \"" + c.members[i] + "\"");
    }
}

/// Sampling weights. Proportional: w_i = s_i / sum(s). Inverted: reciprocal
/// scores normalized, the simplest rule that samples lower-scoring members
/// more often while keeping every weight positive.
inline std::vector<double> brainstorm_weights(const BrainstormConfig& c) {
    validate(c);
    std::vector<double> w(c.member_scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = c.scheme == BrainstormScheme::proportional ? c.member_scores[i] : 1.0 / c.member_scores[i];
        total += w[i];
    }
    for (auto& x : w) x /= total;
    return w;
}

/// One categorical draw from the member set.
inline const std::string& brainstorm_next(const BrainstormConfig& c, std::mt19937_64& rng) {
    auto w = brainstorm_weights(c);
    return c.members[util::sample_categorical(w, rng)];
}

// ---------------------------------------------------------------------------
// Parallel-Select

struct ParallelConfig {
    std::vector<std::string> members;  // exactly 5 distinct model ids
    std::string selector;              // need not be a member
    std::uint64_t seed = 0;
};

inline void validate(const ParallelConfig& c) {
    if (c.members.size() != 5) throw ValidationError("parallel_select: exactly 5 members required");
    for (std::size_t i = 0; i < c.members.size(); ++i)
        for (std::size_t j = i + 1; j < c.members.size(); ++j)
            if (c.members[i] == c.members[j])
                throw ValidationError("parallel_select: duplicate member \"" + c.members[i] + "\"");
    if (c.selector.empty()) throw ValidationError("parallel_select: selector model required");
}

inline constexpr std::string_view kSelectorSystemPrompt =
    "You pick the most promising idea from a list of candidates. You never write new ideas and never explain "
    "your choice.";

/// Placeholders: {question} {ideas} {candidates}
inline constexpr std::string_view kSelectorUserTemplate =
    R"(Question: {question}

Previously accepted ideas:
{ideas}

Candidate next ideas:
{candidates}

Pick the single candidate that is the most promising continuation of the list above: it should answer the question well while being clearly different from every previously accepted idea. Do not write a new idea. Reply with the number of your chosen candidate only.)";

struct SelectStep {
    std::string winner_text;
    std::string winner_model_id;
    clients::GenerationResult winner_gen;
    std::vector<std::string> candidates;         // texts in the shuffled order shown to the selector
    std::vector<std::string> candidate_models;   // producers in the same order (never shown to anyone)
    std::vector<std::string> member_errors;      // failures among the fan-out calls
    std::vector<std::string> selector_transcript;  // selector prompts and raw replies, in order
};

/// One step of the parallel-select protocol: fan out one generation per
/// member (all see the same anonymized accepted chain), shuffle the
/// surviving candidates with the chain RNG, and let the selector pick by
/// number. The winner is returned for ordinary scoring; the selector never
/// sees model identities or pipeline scores. Member failures are tolerated
/// down to 2 surviving candidates.
inline SelectStep parallel_select_step(clients::ClientSet& clients, const ParallelConfig& config,
                                       const bench::GenerationPrompts& prompts, const core::Question& question,
                                       const std::vector<std::string>& accepted, std::mt19937_64& rng,
                                       int selector_retries = 2) {
    validate(config);
    std::string member_prompt = bench::build_generation_prompt(prompts, question.text, accepted);
    auto outcomes = util::parallel_map(config.members, config.members.size(),
                                       [&](const std::string& member, std::size_t) {
                                           return clients.generate(member, prompts.system, member_prompt);
                                       });

    SelectStep step;
    std::vector<std::size_t> surviving;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok()) surviving.push_back(i);
        else step.member_errors.push_back(config.members[i] + ": " + outcomes[i].error_message());
    }
    if (surviving.size() < 2)
        throw StepError("parallel_select: only " + std::to_string(surviving.size()) +
                        " of " + std::to_string(config.members.size()) + " members produced a candidate (" +
                        util::join(step.member_errors, "; ") + ")");

    util::shuffle(surviving, rng);
    for (std::size_t idx : surviving) {
        step.candidates.push_back(outcomes[idx].value->text);
        step.candidate_models.push_back(config.members[idx]);
    }

    std::string numbered;
    for (std::size_t i = 0; i < step.candidates.size(); ++i) {
        numbered += std::to_string(i + 1) + ". " + step.candidates[i];
        if (i + 1 < step.candidates.size()) numbered += '\n';
    }
    std::string selector_prompt = scoring::render_template(
        std::string(kSelectorUserTemplate),
        {{"question", question.text}, {"ideas", bench::format_idea_list(accepted)}, {"candidates", numbered}});

    std::optional<std::size_t> choice;
    std::string raw;
    for (int attempt = 0; attempt <= selector_retries && !choice; ++attempt) {
        std::string p = attempt == 0
                            ? selector_prompt
                            : selector_prompt + "\n\nReply with only the number of one listed candidate.";
        step.selector_transcript.push_back(p);
        raw = clients.generate(config.selector, std::string(kSelectorSystemPrompt), p).text;
        step.selector_transcript.push_back(raw);
        auto num = util::first_number_or_ordinal(raw);
        if (!num) continue;
        double rounded = std::round(*num);
        if (std::abs(*num - rounded) > 1e-9) continue;
        auto idx = static_cast<long long>(rounded);
        if (idx >= 1 && idx <= static_cast<long long>(step.candidates.size()))
            choice = static_cast<std::size_t>(idx - 1);
    }
    if (!choice)
        throw StepError("parallel_select: selector returned no usable candidate number after " +
                        std::to_string(selector_retries + 1) + " attempts; last reply: " + raw);

    std::size_t original = surviving[*choice];
    step.winner_text = outcomes[original].value->text;
    step.winner_model_id = config.members[original];
    step.winner_gen = *outcomes[original].value;
    return step;
}

// ---------------------------------------------------------------------------
// Idea-source adapters

class RouterSource final : public bench::IdeaSource {
public:
    RouterSource(clients::ClientSet& clients, RouterTable table, std::string strategy_id = "router",
                 bench::GenerationPrompts prompts = {})
        : clients_(clients), table_(std::move(table)), strategy_id_(std::move(strategy_id)),
          prompts_(std::move(prompts)) {}

    std::string strategy_id() const override { return strategy_id_; }
    const RouterTable& table() const { return table_; }

    bench::IdeaCandidate next_idea(const core::Question& question, const std::vector<std::string>& accepted,
                                   int) override {
        const std::string& model = route(table_, question);
        auto gen = clients_.generate(model, prompts_.system,
                                     bench::build_generation_prompt(prompts_, question.text, accepted));
        return {gen.text, model, gen};
    }

private:
    clients::ClientSet& clients_;
    RouterTable table_;
    std::string strategy_id_;
    bench::GenerationPrompts prompts_;
};

/// Per-step sampling is keyed on (seed, strategy, question, step), so draws
/// are independent of thread scheduling and identical after a resume.
class BrainstormSource final : public bench::IdeaSource {
public:
    BrainstormSource(clients::ClientSet& clients, BrainstormConfig config, std::string strategy_id = "brainstorm",
                     bench::GenerationPrompts prompts = {})
        : clients_(clients), config_(std::move(config)), strategy_id_(std::move(strategy_id)),
          prompts_(std::move(prompts)) {
        validate(config_);
    }

    std::string strategy_id() const override { return strategy_id_; }

    bench::IdeaCandidate next_idea(const core::Question& question, const std::vector<std::string>& accepted,
                                   int step_index) override {
        auto rng = util::make_rng(config_.seed,
                                  {"brainstorm", strategy_id_, question.id, std::to_string(step_index)});
        const std::string& model = brainstorm_next(config_, rng);
        auto gen = clients_.generate(model, prompts_.system,
                                     bench::build_generation_prompt(prompts_, question.text, accepted));
        return {gen.text, model, gen};
    }

private:
    clients::ClientSet& clients_;
    BrainstormConfig config_;
    std::string strategy_id_;
    bench::GenerationPrompts prompts_;
};

class ParallelSelectSource final : public bench::IdeaSource {
public:
    ParallelSelectSource(clients::ClientSet& clients, ParallelConfig config,
                         std::string strategy_id = "parallel_select", bench::GenerationPrompts prompts = {})
        : clients_(clients), config_(std::move(config)), strategy_id_(std::move(strategy_id)),
          prompts_(std::move(prompts)) {
        validate(config_);
    }

    std::string strategy_id() const override { return strategy_id_; }

    bench::IdeaCandidate next_idea(const core::Question& question, const std::vector<std::string>& accepted,
                                   int step_index) override {
        auto rng = util::make_rng(config_.seed,
                                  {"parallel_select", strategy_id_, question.id, std::to_string(step_index)});
        SelectStep step = parallel_select_step(clients_, config_, prompts_, question, accepted, rng);
        return {step.winner_text, step.winner_model_id, step.winner_gen};
    }

private:
    clients::ClientSet& clients_;
    ParallelConfig config_;
    std::string strategy_id_;
    bench::GenerationPrompts prompts_;
};

}  // namespace ideabench::ensembles
