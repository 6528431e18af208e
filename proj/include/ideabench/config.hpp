#pragma once

// Run configuration: dataset, thresholds, model roster, judge, embedder and
// strategy list, all round-trippable through JSON. The serialized form is
// the config snapshot written into every run directory; a resume is refused
// unless the live config serializes identically. Template files referenced
// by the config are inlined at parse time, so editing one counts as a
// config change.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ideabench/clients.hpp"
#include "ideabench/core.hpp"
#include "ideabench/scoring.hpp"
#include "ideabench/sources.hpp"

namespace ideabench::core {

using json = nlohmann::json;

inline json thresholds_to_json(const Thresholds& t) {
    json j;
    j["tau_embed"] = t.tau_embed;
    j["tau_coherence"] = t.tau_coherence;
    j["tau_llm_novelty"] = t.tau_llm_novelty ? json(*t.tau_llm_novelty) : json(nullptr);
    j["max_steps"] = t.max_steps ? json(*t.max_steps) : json(nullptr);
    return j;
}

inline Thresholds thresholds_from_json(const json& j) {
    Thresholds t;
    t.tau_embed = j.value("tau_embed", 0.15);
    t.tau_coherence = j.value("tau_coherence", 15.0);
    if (j.contains("tau_llm_novelty") && !j["tau_llm_novelty"].is_null())
        t.tau_llm_novelty = j["tau_llm_novelty"].get<double>();
    if (!j.contains("max_steps")) t.max_steps = 200;
    else if (j["max_steps"].is_null()) t.max_steps.reset();
    else t.max_steps = j["max_steps"].get<int>();
    if (t.tau_embed < 0.0 || t.tau_embed > 1.0) throw ValidationError("tau_embed must be in [0, 1]");
    if (t.tau_coherence < 0.0 || t.tau_coherence > 100.0) throw ValidationError("tau_coherence must be in [0, 100]");
    if (t.tau_llm_novelty && (*t.tau_llm_novelty < 0.0 || *t.tau_llm_novelty > 1.0))
        throw ValidationError("tau_llm_novelty must be in [0, 1]");
    if (t.max_steps && *t.max_steps <= 0) throw ValidationError("max_steps must be positive (or null to disable)");
    return t;
}

struct StrategyConfig {
    enum class Kind { single, router, brainstorm, parallel_select };

    std::string id;
    Kind kind = Kind::single;
    // single
    std::string model;
    // router: an explicit table, or a run directory to derive one from
    std::map<std::string, std::string> router_table;
    std::string derive_from_run;
    std::vector<std::string> constituents;  // strategies of that run to consider
    // brainstorm
    std::vector<std::string> members;
    std::string scheme = "proportional";
    std::map<std::string, double> member_scores;
    // parallel_select (also uses members)
    std::string selector;

    static const char* kind_name(Kind k) {
        switch (k) {
            case Kind::single: return "single";
            case Kind::router: return "router";
            case Kind::brainstorm: return "brainstorm";
            case Kind::parallel_select: return "parallel_select";
        }
        return "?";
    }

    json to_json() const {
        json j;
        j["id"] = id;
        j["kind"] = kind_name(kind);
        switch (kind) {
            case Kind::single:
                j["model"] = model;
                break;
            case Kind::router:
                if (!router_table.empty()) j["table"] = router_table;
                if (!derive_from_run.empty()) j["derive_from_run"] = derive_from_run;
                if (!constituents.empty()) j["constituents"] = constituents;
                break;
            case Kind::brainstorm:
                j["members"] = members;
                j["scheme"] = scheme;
                j["member_scores"] = member_scores;
                break;
            case Kind::parallel_select:
                j["members"] = members;
                j["selector"] = selector;
                break;
        }
        return j;
    }

    static StrategyConfig from_json(const json& j) {
        StrategyConfig s;
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "single") s.kind = Kind::single;
        else if (kind == "router") s.kind = Kind::router;
        else if (kind == "brainstorm") s.kind = Kind::brainstorm;
        else if (kind == "parallel_select") s.kind = Kind::parallel_select;
        else throw ParseError("unknown strategy kind: " + kind);
        switch (s.kind) {
            case Kind::single:
                s.model = j.at("model").get<std::string>();
                break;
            case Kind::router:
                if (j.contains("table"))
                    for (auto& [k, v] : j["table"].items()) s.router_table[k] = v.get<std::string>();
                s.derive_from_run = j.value("derive_from_run", "");
                if (j.contains("constituents")) s.constituents = j["constituents"].get<std::vector<std::string>>();
                if (s.router_table.empty() && s.derive_from_run.empty())
                    throw ParseError("router strategy needs \"table\" or \"derive_from_run\"");
                break;
            case Kind::brainstorm:
                s.members = j.at("members").get<std::vector<std::string>>();
                s.scheme = j.value("scheme", "proportional");
                if (s.scheme != "proportional" && s.scheme != "inverted")
                    throw ParseError("brainstorm scheme must be \"proportional\" or \"inverted\"");
                for (auto& [k, v] : j.at("member_scores").items()) s.member_scores[k] = v.get<double>();
                break;
            case Kind::parallel_select:
                s.members = j.at("members").get<std::vector<std::string>>();
                s.selector = j.at("selector").get<std::string>();
                break;
        }
        s.id = j.value("id", "");
        if (s.id.empty()) s.id = s.kind == Kind::single ? s.model : kind;
        return s;
    }
};

inline json judge_to_json(const scoring::JudgeSpec& j) {
    json out;
    out["model"] = j.model.to_json();
    out["similarity_template"] = j.similarity_template;
    out["coherence_template"] = j.coherence_template;
    out["parser_retries"] = j.parser.retries;
    out["similarity_parallelism"] = j.similarity_parallelism;
    return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open template file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline scoring::JudgeSpec judge_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    scoring::JudgeSpec spec;
    spec.model = clients::ModelSpec::from_json(j.at("model"));
    if (j.contains("similarity_template_file"))
        spec.similarity_template = read_text_file(base_dir / j["similarity_template_file"].get<std::string>());
    else if (j.contains("similarity_template"))
        spec.similarity_template = j["similarity_template"].get<std::string>();
    if (j.contains("coherence_template_file"))
        spec.coherence_template = read_text_file(base_dir / j["coherence_template_file"].get<std::string>());
    else if (j.contains("coherence_template"))
        spec.coherence_template = j["coherence_template"].get<std::string>();
    spec.parser.retries = j.value("parser_retries", 2);
    spec.similarity_parallelism = j.value("similarity_parallelism", 4);
    return spec;
}

struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    int concurrency = 4;
    Thresholds thresholds;
    clients::EmbedderSpec embedder;
    scoring::JudgeSpec judge;
    std::vector<clients::ModelSpec> models;
    std::vector<StrategyConfig> strategies;
    bench::GenerationPrompts prompts;

    json to_json() const {
        json j;
        j["dataset"] = dataset.string();
        j["output_dir"] = output_dir.string();
        j["seed"] = seed;
        j["concurrency"] = concurrency;
        j["thresholds"] = thresholds_to_json(thresholds);
        j["embedder"] = embedder.to_json();
        j["judge"] = judge_to_json(judge);
        json models_json = json::array();
        for (const auto& m : models) models_json.push_back(m.to_json());
        j["models"] = models_json;
        json strategies_json = json::array();
        for (const auto& s : strategies) strategies_json.push_back(s.to_json());
        j["strategies"] = strategies_json;
        j["prompts"] = {{"system", prompts.system}, {"user_template", prompts.user_template}};
        return j;
    }

    static RunConfig from_json(const json& j, const std::filesystem::path& base_dir = {}) {
        RunConfig c;
        c.dataset = j.at("dataset").get<std::string>();
        c.output_dir = j.value("output_dir", "");
        c.seed = j.value("seed", 0ULL);
        c.concurrency = j.value("concurrency", 4);
        if (c.concurrency < 1) throw ValidationError("concurrency must be >= 1");
        if (j.contains("thresholds")) c.thresholds = thresholds_from_json(j["thresholds"]);
        if (j.contains("embedder")) c.embedder = clients::EmbedderSpec::from_json(j["embedder"]);
        else {
            c.embedder.embedder_id = "hash-embedder";
            c.embedder.kind = clients::EmbedderSpec::Kind::scripted_hash;
        }
        c.judge = judge_from_json(j.at("judge"), base_dir);
        for (const auto& m : j.at("models")) c.models.push_back(clients::ModelSpec::from_json(m));
        for (const auto& s : j.at("strategies")) c.strategies.push_back(StrategyConfig::from_json(s));
        if (j.contains("prompts")) {
            if (j["prompts"].contains("system")) c.prompts.system = j["prompts"]["system"].get<std::string>();
            if (j["prompts"].contains("user_template_file"))
                c.prompts.user_template =
                    read_text_file(base_dir / j["prompts"]["user_template_file"].get<std::string>());
            else if (j["prompts"].contains("user_template"))
                c.prompts.user_template = j["prompts"]["user_template"].get<std::string>();
        }
        return c;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open config file: " + path.string());
        json j;
        try {
            in >> j;
        } catch (const json::parse_error& e) {
            throw ParseError("config file " + path.string() + ": " + e.what());
        }
        return from_json(j, path.parent_path());
    }

    /// Stable serialized form used for snapshot comparison on resume.
    std::string canonical() const { return to_json().dump(2); }
};

}  // namespace ideabench::core
