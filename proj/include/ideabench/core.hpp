#pragma once

// Domain types shared by the whole harness: the question dataset, scoring
// thresholds, per-response records and idea chains.
//
// Question file format: UTF-8, one JSON object per line, fields
//   {"id": "...", "text": "...", "domain": "...", "subdomain": "..."?}
// where subdomain is present exactly when domain is "Physics".

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ideabench/util.hpp"

namespace ideabench::core {

using json = nlohmann::json;

enum class Domain {
    Physics,
    Chemistry,
    Biology,
    Neuroscience,
    Nanoscience,
    EnvironmentalScience,
};

inline constexpr std::array<Domain, 6> kAllDomains = {
    Domain::Physics,       Domain::Chemistry,   Domain::Biology,
    Domain::Neuroscience,  Domain::Nanoscience, Domain::EnvironmentalScience,
};

inline const char* to_string(Domain d) {
    switch (d) {
        case Domain::Physics: return "Physics";
        case Domain::Chemistry: return "Chemistry";
        case Domain::Biology: return "Biology";
        case Domain::Neuroscience: return "Neuroscience";
        case Domain::Nanoscience: return "Nanoscience";
        case Domain::EnvironmentalScience: return "EnvironmentalScience";
    }
    return "?";
}

inline std::optional<Domain> domain_from_string(std::string_view s) {
    for (Domain d : kAllDomains)
        if (s == to_string(d)) return d;
    return std::nullopt;
}

/// Physics is the only domain the dataset subdivides.
enum class Subdomain {
    FundamentalPhysics,
    Astrophysics,
    SynchrotronScience,
    CondensedMatterPhysics,
};

inline constexpr std::array<Subdomain, 4> kAllSubdomains = {
    Subdomain::FundamentalPhysics,
    Subdomain::Astrophysics,
    Subdomain::SynchrotronScience,
    Subdomain::CondensedMatterPhysics,
};

inline const char* to_string(Subdomain s) {
    switch (s) {
        case Subdomain::FundamentalPhysics: return "FundamentalPhysics";
        case Subdomain::Astrophysics: return "Astrophysics";
        case Subdomain::SynchrotronScience: return "SynchrotronScience";
        case Subdomain::CondensedMatterPhysics: return "CondensedMatterPhysics";
    }
    return "?";
}

inline std::optional<Subdomain> subdomain_from_string(std::string_view s) {
    for (Subdomain sd : kAllSubdomains)
        if (s == to_string(sd)) return sd;
    return std::nullopt;
}

struct Question {
    std::string id;
    std::string text;
    Domain domain = Domain::Physics;
    std::optional<Subdomain> subdomain;  // present iff domain == Physics

    /// Category key used by routing and per-domain analysis. Physics
    /// questions are keyed by subdomain ("Physics/Astrophysics"), other
    /// domains by their name.
    std::string category() const {
        std::string key = to_string(domain);
        if (subdomain) {
            key += '/';
            key += to_string(*subdomain);
        }
        return key;
    }

    bool operator==(const Question&) const = default;
};

/// Chain termination thresholds. Defaults implement the benchmark rule:
/// stop when embedding novelty drops below 0.15 or coherence below 15,
/// both strict. The judge-novelty gate is off unless a threshold is set,
/// and max_steps is a cost fuse, disabled by passing nullopt.
struct Thresholds {
    double tau_embed = 0.15;
    double tau_coherence = 15.0;
    std::optional<double> tau_llm_novelty{};
    std::optional<int> max_steps = 200;

    bool operator==(const Thresholds&) const = default;
};

enum class TerminationReason {
    none,
    embed_below,
    coherence_below,
    llm_novelty_below,
    step_cap,
};

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::none: return "none";
        case TerminationReason::embed_below: return "embed_below";
        case TerminationReason::coherence_below: return "coherence_below";
        case TerminationReason::llm_novelty_below: return "llm_novelty_below";
        case TerminationReason::step_cap: return "step_cap";
    }
    return "?";
}

inline std::optional<TerminationReason> termination_from_string(std::string_view s) {
    for (auto r : {TerminationReason::none, TerminationReason::embed_below,
                   TerminationReason::coherence_below, TerminationReason::llm_novelty_below,
                   TerminationReason::step_cap})
        if (s == to_string(r)) return r;
    return std::nullopt;
}

/// One generated response and its evaluation. Novelty fields are absent
/// when scoring skipped them (a candidate that already failed coherence).
/// A record is accepted unless a threshold fired; the step-cap record is
/// accepted but still terminates its chain.
struct IdeaRecord {
    std::string question_id;
    int step_index = 0;
    std::string model_id;
    std::string text;
    std::optional<double> embed_novelty;
    std::optional<double> llm_novelty;
    double coherence = 0.0;
    bool accepted = false;
    TerminationReason termination_reason = TerminationReason::none;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long reasoning_tokens = 0;
    long long wall_clock_ms = 0;

    json to_json() const {
        json j;
        j["question_id"] = question_id;
        j["step_index"] = step_index;
        j["model_id"] = model_id;
        j["text"] = text;
        j["embed_novelty"] = embed_novelty ? json(*embed_novelty) : json(nullptr);
        j["llm_novelty"] = llm_novelty ? json(*llm_novelty) : json(nullptr);
        j["coherence"] = coherence;
        j["accepted"] = accepted;
        j["termination_reason"] = to_string(termination_reason);
        j["prompt_tokens"] = prompt_tokens;
        j["completion_tokens"] = completion_tokens;
        j["reasoning_tokens"] = reasoning_tokens;
        j["wall_clock_ms"] = wall_clock_ms;
        return j;
    }

    static IdeaRecord from_json(const json& j) {
        IdeaRecord r;
        r.question_id = j.at("question_id").get<std::string>();
        r.step_index = j.at("step_index").get<int>();
        r.model_id = j.at("model_id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        if (j.contains("embed_novelty") && !j["embed_novelty"].is_null())
            r.embed_novelty = j["embed_novelty"].get<double>();
        if (j.contains("llm_novelty") && !j["llm_novelty"].is_null())
            r.llm_novelty = j["llm_novelty"].get<double>();
        r.coherence = j.at("coherence").get<double>();
        r.accepted = j.at("accepted").get<bool>();
        auto reason = termination_from_string(j.at("termination_reason").get<std::string>());
        if (!reason) throw ParseError("unknown termination_reason in record: " + j["termination_reason"].dump());
        r.termination_reason = *reason;
        r.prompt_tokens = j.value("prompt_tokens", 0LL);
        r.completion_tokens = j.value("completion_tokens", 0LL);
        r.reasoning_tokens = j.value("reasoning_tokens", 0LL);
        r.wall_clock_ms = j.value("wall_clock_ms", 0LL);
        return r;
    }
};

enum class ChainStatus { running, terminated };

/// Ordered responses for one (strategy, question) pair. Only the final
/// record may carry a non-none termination reason.
struct ChainState {
    std::string strategy_id;
    std::string question_id;
    std::vector<IdeaRecord> records;
    ChainStatus status = ChainStatus::running;

    bool terminated() const { return status == ChainStatus::terminated; }
};

// ---------------------------------------------------------------------------
// Question dataset

namespace detail {

inline Question question_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": question entry must be a JSON object");
    Question q;
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
        throw ParseError(where + ": missing or empty \"id\"");
    q.id = j["id"].get<std::string>();
    if (!j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty())
        throw ParseError(where + ": question \"" + q.id + "\" has missing or empty \"text\"");
    q.text = j["text"].get<std::string>();
    if (!j.contains("domain") || !j["domain"].is_string())
        throw ParseError(where + ": question \"" + q.id + "\" has missing \"domain\"");
    auto dom = domain_from_string(j["domain"].get<std::string>());
    if (!dom)
        throw ParseError(where + ": question \"" + q.id + "\" has unknown domain \"" +
                         j["domain"].get<std::string>() + "\"");
    q.domain = *dom;
    if (j.contains("subdomain") && !j["subdomain"].is_null()) {
        if (q.domain != Domain::Physics)
            throw ParseError(where + ": question \"" + q.id + "\" has a subdomain but domain is " +
                             to_string(q.domain) + " (only Physics is subdivided)");
        auto sub = subdomain_from_string(j["subdomain"].get<std::string>());
        if (!sub)
            throw ParseError(where + ": question \"" + q.id + "\" has unknown subdomain \"" +
                             j["subdomain"].get<std::string>() + "\"");
        q.subdomain = *sub;
    } else if (q.domain == Domain::Physics) {
        throw ParseError(where + ": Physics question \"" + q.id + "\" is missing its subdomain");
    }
    return q;
}

}  // namespace detail

inline std::vector<Question> parse_questions(std::istream& in, const std::string& source_name) {
    std::vector<Question> out;
    std::map<std::string, int> first_line_of_id;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim(line).empty()) continue;
        std::string where = source_name + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": invalid JSON: " + e.what());
        }
        Question q = detail::question_from_json(j, where);
        auto [it, inserted] = first_line_of_id.emplace(q.id, line_no);
        if (!inserted)
            throw ParseError(source_name + ": duplicate question id \"" + q.id + "\" (lines " +
                             std::to_string(it->second) + " and " + std::to_string(line_no) + ")");
        out.push_back(std::move(q));
    }
    if (out.empty()) throw ParseError(source_name + ": no questions");
    return out;
}

inline std::vector<Question> load_questions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open question file: " + path.string());
    return parse_questions(in, path.filename().string());
}

inline std::string serialize_questions(const std::vector<Question>& questions) {
    std::string out;
    for (const auto& q : questions) {
        json j;
        j["id"] = q.id;
        j["text"] = q.text;
        j["domain"] = to_string(q.domain);
        if (q.subdomain) j["subdomain"] = to_string(*q.subdomain);
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Question> filter_by_domain(const std::vector<Question>& questions, Domain domain,
                                              std::optional<Subdomain> subdomain = {}) {
    std::vector<Question> out;
    for (const auto& q : questions) {
        if (q.domain != domain) continue;
        if (subdomain && q.subdomain != subdomain) continue;
        out.push_back(q);
    }
    return out;
}

}  // namespace ideabench::core
