#pragma once

// The evaluation pipeline for one candidate idea:
//
//   embedding novelty  E(r, R) = 1 - max over r' in R of cos(e(r), e(r'))
//   judge novelty      L(r, R) = 1 - max over r' in R of judge similarity(r, r')
//   coherence          C(r)    = judge rating of how well r answers the question, [0, 100]
//
// plus the chain termination rule: stop when E < tau_embed or C < tau_coherence
// (strict); optionally when L drops below an extra judge-novelty threshold.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ideabench/clients.hpp"
#include "ideabench/core.hpp"
#include "ideabench/util.hpp"

namespace ideabench::scoring {

/// Scoring failure after retries; the message carries the raw judge reply.
class ScoringError : public Error {
public:
    ScoringError(const std::string& msg, std::string raw) : Error(msg + "; raw reply: " + raw), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};

struct ScoreTriple {
    double embed_novelty = 1.0;  // [0, 1], 1 when the prior set is empty
    double llm_novelty = 1.0;    // [0, 1], 1 when the prior set is empty
    double coherence = 0.0;      // [0, 100]
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero-norm vector");
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

/// 1 minus the maximum cosine similarity between `v` and any prior vector.
/// Empty priors score 1.0: the first idea is maximally novel by convention.
/// The result is clamped to [0, 1] so anticorrelated embeddings cannot
/// push it above 1.
inline double embedding_novelty(const std::vector<double>& v, const std::vector<std::vector<double>>& priors) {
    if (priors.empty()) return 1.0;
    double max_sim = -1.0;
    for (const auto& p : priors) max_sim = std::max(max_sim, cosine_similarity(v, p));
    return std::clamp(1.0 - max_sim, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Judge

inline constexpr std::string_view kJudgeSystemPrompt =
    "You are a strict numeric grader. Always reply with a single number and nothing else.";

/// Placeholders: {question} {candidate} {prior}
inline constexpr std::string_view kDefaultSimilarityTemplate =
    R"(Two candidate answers to the same scientific question are shown below.

Question: {question}

Response A:
{prior}

Response B:
{candidate}

Rate how conceptually similar Response B is to Response A on a scale from 0.00 (entirely different ideas) to 1.00 (the same idea restated). Reply with only the number.)";

/// Placeholders: {question} {candidate}
inline constexpr std::string_view kDefaultCoherenceTemplate =
    R"(A candidate answer to a scientific question is shown below.

Question: {question}

Response:
{candidate}

Rate from 0 to 100 how well the response answers the question and how logically consistent it is, where 0 means incoherent or irrelevant and 100 means a fully coherent, on-topic answer. Reply with only the number.)";

inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out(tmpl);
    for (const auto& [name, value] : vars) {
        std::string key = "{" + name + "}";
        std::size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    }
    return out;
}

struct ParserSettings {
    int retries = 2;  // re-asks after an unparseable reply
};

struct JudgeSpec {
    clients::ModelSpec model;
    std::string similarity_template{kDefaultSimilarityTemplate};
    std::string coherence_template{kDefaultCoherenceTemplate};
    ParserSettings parser;
    int similarity_parallelism = 4;
};

/// The judge model behind L and C. Stateless per call; safe to share across
/// candidates being scored concurrently.
class Judge {
public:
    Judge(clients::ClientSet& clients, JudgeSpec spec, std::function<void(const std::string&)> warn = {})
        : clients_(clients), spec_(std::move(spec)),
          warn_(warn ? std::move(warn) : [](const std::string& m) { std::fprintf(stderr, "[judge] %s\n", m.c_str()); }) {}

    const JudgeSpec& spec() const { return spec_; }

    /// Judge-rated similarity of candidate vs one prior idea, in [0, 1].
    double similarity(const std::string& question, const std::string& candidate, const std::string& prior) {
        std::string prompt = render_template(spec_.similarity_template,
                                             {{"question", question}, {"candidate", candidate}, {"prior", prior}});
        return ask_number(prompt, 0.0, 1.0, "similarity");
    }

    /// Coherence on [0, 100]. Candidates that normalize to the empty string
    /// score 0 without consulting the judge.
    double coherence(const std::string& question, const std::string& candidate) {
        if (util::normalize_text(candidate).empty()) return 0.0;
        std::string prompt =
            render_template(spec_.coherence_template, {{"question", question}, {"candidate", candidate}});
        return ask_number(prompt, 0.0, 100.0, "coherence");
    }

    /// 1 minus the max judge similarity against each prior. One judgment per
    /// prior with bounded parallelism; empty priors score 1.0 with no calls.
    double llm_novelty(const std::string& question, const std::string& candidate,
                       const std::vector<std::string>& priors) {
        if (priors.empty()) return 1.0;
        auto outcomes = util::parallel_map(priors, static_cast<std::size_t>(std::max(1, spec_.similarity_parallelism)),
                                           [&](const std::string& prior, std::size_t) {
                                               return similarity(question, candidate, prior);
                                           });
        double max_sim = 0.0;
        for (const auto& o : outcomes) {
            if (!o.ok()) std::rethrow_exception(o.error);
            max_sim = std::max(max_sim, *o.value);
        }
        return std::clamp(1.0 - max_sim, 0.0, 1.0);
    }

private:
    double ask_number(const std::string& prompt, double lo, double hi, const char* what) {
        std::string raw;
        for (int attempt = 0; attempt <= spec_.parser.retries; ++attempt) {
            std::string p = attempt == 0 ? prompt : prompt + "\n\nReply with only a number.";
            raw = clients_.generate(spec_.model.model_id, std::string(kJudgeSystemPrompt), p).text;
            auto num = util::first_number(raw);
            if (!num) continue;
            if (*num < lo || *num > hi) {
                warn_(std::string(what) + " reply " + std::to_string(*num) + " outside [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "], clamped");
                return std::clamp(*num, lo, hi);
            }
            return *num;
        }
        throw ScoringError(std::string("judge returned no parseable ") + what + " after " +
                               std::to_string(spec_.parser.retries + 1) + " attempts",
                           raw);
    }

    clients::ClientSet& clients_;
    JudgeSpec spec_;
    std::function<void(const std::string&)> warn_;
};

// ---------------------------------------------------------------------------
// Termination

/// Decide whether a scored candidate ends its chain. Thresholds are strict:
/// boundary values continue. When several gates fire at once the reported
/// reason follows a fixed order (coherence, embedding, judge novelty) so
/// logs are deterministic. The step cap fires only when no threshold did,
/// and marks a chain cut short by cost rather than by a failed candidate.
inline core::TerminationReason should_terminate(const ScoreTriple& s, const core::Thresholds& th, int step_index) {
    if (s.coherence < th.tau_coherence) return core::TerminationReason::coherence_below;
    if (s.embed_novelty < th.tau_embed) return core::TerminationReason::embed_below;
    if (th.tau_llm_novelty && s.llm_novelty < *th.tau_llm_novelty)
        return core::TerminationReason::llm_novelty_below;
    if (th.max_steps && step_index + 1 >= *th.max_steps) return core::TerminationReason::step_cap;
    return core::TerminationReason::none;
}

}  // namespace ideabench::scoring
