#pragma once

// Uniform access to idea-generating models: OpenAI-style and Anthropic-style
// chat endpoints, plain local HTTP servers speaking the OpenAI schema, and a
// deterministic scripted backend for offline runs. Adds retries with
// exponential backoff, a sliding-window rate limiter, token accounting and a
// content-addressed embedding cache.

#include <chrono>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ideabench/util.hpp"

namespace ideabench::clients {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

class AuthError : public Error {
public:
    using Error::Error;
};
class RateLimitedError : public Error {
public:
    using Error::Error;
};
class TimeoutError : public Error {
public:
    using Error::Error;
};
/// Endpoint answered but the payload was not what the schema promises.
/// Carries the raw payload (truncated) in the message.
class MalformedResponseError : public Error {
public:
    using Error::Error;
};
class TransportError : public Error {
public:
    using Error::Error;
};
class HttpStatusError : public Error {
public:
    using Error::Error;
};
class FixtureError : public Error {
public:
    using Error::Error;
};
class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

enum class Provider { openai_compatible, anthropic_compatible, local_http, scripted };

inline const char* to_string(Provider p) {
    switch (p) {
        case Provider::openai_compatible: return "openai_compatible";
        case Provider::anthropic_compatible: return "anthropic_compatible";
        case Provider::local_http: return "local_http";
        case Provider::scripted: return "scripted";
    }
    return "?";
}

inline std::optional<Provider> provider_from_string(std::string_view s) {
    for (auto p : {Provider::openai_compatible, Provider::anthropic_compatible, Provider::local_http,
                   Provider::scripted})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

/// Reasoning budget for providers that support it. Exactly one of the two
/// fields is meaningful: token budgets for Anthropic-style endpoints,
/// effort levels for OpenAI-style ones.
struct Reasoning {
    std::optional<long long> budget_tokens;
    std::optional<std::string> effort_level;

    bool operator==(const Reasoning&) const = default;
};

// ---------------------------------------------------------------------------
// Scripted fixtures

struct ScriptedRule {
    std::string contains;  // matched as substring of "system\nuser"
    std::string reply;
};

/// Pure idea generator for offline benchmark runs. Replies are a function of
/// the user prompt alone, so runs are deterministic under any thread
/// interleaving and resumable mid-chain. Expects the default generation
/// prompt layout ("Question: ..." plus a numbered list of prior ideas): it
/// emits a fresh idea until the per-question budget is exhausted, then
/// repeats its first idea verbatim, which drives embedding novelty to zero.
struct SyntheticIdeas {
    int default_budget = 4;
    std::map<std::string, int> budget_overrides;  // keyed by exact question text
    long long reasoning_tokens = 0;
    std::string salt;  // distinguishes two synthetic models given one prompt
};

struct ScriptedFixture {
    enum class Mode { list, by_prompt_hash, rules, synthetic_ideas };

    struct Reply {
        std::string text;
        long long reasoning_tokens = 0;
    };

    Mode mode = Mode::list;
    std::vector<Reply> replies;                    // list
    std::map<std::string, std::string> by_hash;    // fnv1a64 hex of user prompt -> reply
    std::vector<ScriptedRule> rules;               // rules, first match wins
    std::string default_reply;                     // rules fallback ("" = error)
    SyntheticIdeas synthetic;

    static ScriptedFixture list(std::vector<std::string> texts) {
        ScriptedFixture f;
        f.mode = Mode::list;
        for (auto& t : texts) f.replies.push_back({std::move(t), 0});
        return f;
    }

    static ScriptedFixture constant(std::string reply) {
        ScriptedFixture f;
        f.mode = Mode::rules;
        f.default_reply = std::move(reply);
        return f;
    }

    static ScriptedFixture from_json(const json& j);
    static ScriptedFixture from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw FixtureError("cannot open fixture file: " + path.string());
        json j;
        try {
            in >> j;
        } catch (const json::parse_error& e) {
            throw FixtureError("fixture file " + path.string() + ": " + e.what());
        }
        return from_json(j);
    }

    json to_json() const;
};

inline const char* to_string(ScriptedFixture::Mode m) {
    switch (m) {
        case ScriptedFixture::Mode::list: return "list";
        case ScriptedFixture::Mode::by_prompt_hash: return "by_prompt_hash";
        case ScriptedFixture::Mode::rules: return "rules";
        case ScriptedFixture::Mode::synthetic_ideas: return "synthetic_ideas";
    }
    return "?";
}

inline ScriptedFixture ScriptedFixture::from_json(const json& j) {
    ScriptedFixture f;
    if (j.is_array()) {  // shorthand: a JSON list of replies consumed in order
        f.mode = Mode::list;
        for (const auto& e : j) {
            if (e.is_string()) f.replies.push_back({e.get<std::string>(), 0});
            else f.replies.push_back({e.at("text").get<std::string>(), e.value("reasoning_tokens", 0LL)});
        }
        return f;
    }
    std::string mode = j.value("mode", "list");
    if (mode == "list") {
        f.mode = Mode::list;
        for (const auto& e : j.value("replies", json::array())) {
            if (e.is_string()) f.replies.push_back({e.get<std::string>(), 0});
            else f.replies.push_back({e.at("text").get<std::string>(), e.value("reasoning_tokens", 0LL)});
        }
    } else if (mode == "by_prompt_hash") {
        f.mode = Mode::by_prompt_hash;
        for (auto& [k, v] : j.at("replies").items()) f.by_hash[k] = v.get<std::string>();
    } else if (mode == "rules") {
        f.mode = Mode::rules;
        for (const auto& e : j.value("rules", json::array()))
            f.rules.push_back({e.at("contains").get<std::string>(), e.at("reply").get<std::string>()});
        f.default_reply = j.value("default", "");
    } else if (mode == "synthetic_ideas") {
        f.mode = Mode::synthetic_ideas;
        f.synthetic.default_budget = j.value("default_budget", 4);
        f.synthetic.reasoning_tokens = j.value("reasoning_tokens", 0LL);
        f.synthetic.salt = j.value("salt", "");
        if (j.contains("budget_overrides"))
            for (auto& [k, v] : j["budget_overrides"].items()) f.synthetic.budget_overrides[k] = v.get<int>();
    } else {
        throw FixtureError("unknown scripted fixture mode: " + mode);
    }
    return f;
}

inline json ScriptedFixture::to_json() const {
    json j;
    j["mode"] = to_string(mode);
    switch (mode) {
        case Mode::list: {
            json arr = json::array();
            for (const auto& r : replies) {
                if (r.reasoning_tokens == 0) arr.push_back(r.text);
                else arr.push_back({{"text", r.text}, {"reasoning_tokens", r.reasoning_tokens}});
            }
            j["replies"] = arr;
            break;
        }
        case Mode::by_prompt_hash:
            j["replies"] = by_hash;
            break;
        case Mode::rules: {
            json arr = json::array();
            for (const auto& r : rules) arr.push_back({{"contains", r.contains}, {"reply", r.reply}});
            j["rules"] = arr;
            j["default"] = default_reply;
            break;
        }
        case Mode::synthetic_ideas:
            j["default_budget"] = synthetic.default_budget;
            j["reasoning_tokens"] = synthetic.reasoning_tokens;
            if (!synthetic.salt.empty()) j["salt"] = synthetic.salt;
            if (!synthetic.budget_overrides.empty()) j["budget_overrides"] = synthetic.budget_overrides;
            break;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Model specification

struct ModelSpec {
    std::string model_id;                 // unique within a run
    Provider provider = Provider::scripted;
    std::string endpoint;                 // e.g. "https://api.openai.com/v1"
    std::string api_key_env;              // env var holding the credential; never logged
    std::string model_name;               // provider-side identifier
    std::optional<Reasoning> reasoning;
    double temperature = 1.0;
    long long max_output_tokens = 2048;
    int requests_per_minute = 60;
    ScriptedFixture fixture;              // scripted provider only

    json to_json() const {
        json j;
        j["model_id"] = model_id;
        j["provider"] = to_string(provider);
        if (!endpoint.empty()) j["endpoint"] = endpoint;
        if (!api_key_env.empty()) j["api_key_env"] = api_key_env;
        if (!model_name.empty()) j["model_name"] = model_name;
        if (reasoning) {
            json r;
            if (reasoning->budget_tokens) r["budget_tokens"] = *reasoning->budget_tokens;
            if (reasoning->effort_level) r["effort_level"] = *reasoning->effort_level;
            j["reasoning"] = r;
        }
        j["temperature"] = temperature;
        j["max_output_tokens"] = max_output_tokens;
        j["requests_per_minute"] = requests_per_minute;
        if (provider == Provider::scripted) j["fixture"] = fixture.to_json();
        return j;
    }

    static ModelSpec from_json(const json& j) {
        ModelSpec s;
        s.model_id = j.at("model_id").get<std::string>();
        auto p = provider_from_string(j.at("provider").get<std::string>());
        if (!p) throw ParseError("model \"" + s.model_id + "\": unknown provider " + j["provider"].dump());
        s.provider = *p;
        s.endpoint = j.value("endpoint", "");
        s.api_key_env = j.value("api_key_env", "");
        s.model_name = j.value("model_name", "");
        if (j.contains("reasoning") && !j["reasoning"].is_null()) {
            Reasoning r;
            if (j["reasoning"].contains("budget_tokens")) r.budget_tokens = j["reasoning"]["budget_tokens"].get<long long>();
            if (j["reasoning"].contains("effort_level")) r.effort_level = j["reasoning"]["effort_level"].get<std::string>();
            s.reasoning = r;
        }
        s.temperature = j.value("temperature", 1.0);
        s.max_output_tokens = j.value("max_output_tokens", 2048LL);
        s.requests_per_minute = j.value("requests_per_minute", 60);
        if (j.contains("fixture")) s.fixture = ScriptedFixture::from_json(j["fixture"]);
        if (j.contains("fixture_file")) s.fixture = ScriptedFixture::from_file(j["fixture_file"].get<std::string>());
        return s;
    }
};

struct GenerationResult {
    std::string text;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long reasoning_tokens = 0;  // 0 when the provider reports none
    long long latency_ms = 0;
};

/// Collect every constraint violation for one spec; empty means valid.
inline std::vector<std::string> validate_spec(const ModelSpec& s) {
    std::vector<std::string> errs;
    auto who = [&] { return "model \"" + s.model_id + "\": "; };
    if (s.model_id.empty()) errs.push_back("model spec has empty model_id");
    bool remote = s.provider != Provider::scripted;
    if (remote && s.endpoint.empty()) errs.push_back(who() + "endpoint required for remote providers");
    if (remote && s.model_name.empty()) errs.push_back(who() + "model_name required for remote providers");
    if ((s.provider == Provider::openai_compatible || s.provider == Provider::anthropic_compatible) &&
        s.api_key_env.empty())
        errs.push_back(who() + "api_key_env required for this provider");
    if (s.reasoning) {
        switch (s.provider) {
            case Provider::scripted:
            case Provider::local_http:
                errs.push_back(who() + "reasoning unsupported for provider " + to_string(s.provider));
                break;
            case Provider::openai_compatible:
                if (s.reasoning->budget_tokens)
                    errs.push_back(who() + "openai_compatible reasoning uses effort_level, not budget_tokens");
                break;
            case Provider::anthropic_compatible:
                if (s.reasoning->effort_level)
                    errs.push_back(who() + "anthropic_compatible reasoning uses budget_tokens, not effort_level");
                break;
        }
        if (s.reasoning->budget_tokens && *s.reasoning->budget_tokens <= 0)
            errs.push_back(who() + "reasoning budget_tokens must be positive");
    }
    if (!(s.temperature >= 0.0 && s.temperature <= 2.0)) errs.push_back(who() + "temperature must be in [0, 2]");
    if (s.max_output_tokens <= 0) errs.push_back(who() + "max_output_tokens must be positive");
    if (s.requests_per_minute <= 0) errs.push_back(who() + "requests_per_minute must be positive");
    return errs;
}

/// Validate a whole roster at once, adding cross-spec checks.
inline std::vector<std::string> validate_specs(const std::vector<ModelSpec>& specs) {
    std::vector<std::string> errs;
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto one = validate_spec(specs[i]);
        errs.insert(errs.end(), one.begin(), one.end());
        auto [it, inserted] = seen.emplace(specs[i].model_id, i);
        if (!inserted)
            errs.push_back("duplicate model_id \"" + specs[i].model_id + "\" (specs " +
                           std::to_string(it->second) + " and " + std::to_string(i) + ")");
    }
    return errs;
}

// ---------------------------------------------------------------------------
// Retry, rate limiting, attempt log

struct RetryPolicy {
    int max_attempts = 6;
    double base_seconds = 1.0;
    double cap_seconds = 60.0;
};

/// Injectable clock and sleeper so rate-limit and backoff behavior is
/// testable without waiting on wall time.
struct Hooks {
    std::function<Clock::time_point()> now = [] { return Clock::now(); };
    std::function<void(std::chrono::duration<double>)> sleep = [](std::chrono::duration<double> d) {
        std::this_thread::sleep_for(d);
    };
    std::uint64_t backoff_seed = 0;
};

struct Attempt {
    std::string model_id;
    int attempt = 0;          // 0-based within one logical call
    std::string outcome;      // ok | rate_limited | timeout | transport_error | ...
    Clock::time_point at{};   // when the outbound call was issued
};

namespace detail {

inline std::pair<std::string, bool> classify_error(const std::exception& e) {
    if (dynamic_cast<const RateLimitedError*>(&e)) return {"rate_limited", true};
    if (dynamic_cast<const TimeoutError*>(&e)) return {"timeout", true};
    if (dynamic_cast<const TransportError*>(&e)) return {"transport_error", true};
    if (dynamic_cast<const AuthError*>(&e)) return {"auth_error", false};
    if (dynamic_cast<const MalformedResponseError*>(&e)) return {"malformed_response", false};
    if (dynamic_cast<const FixtureError*>(&e)) return {"fixture_error", false};
    return {"error", false};
}

template <typename F, typename LogFn>
auto call_with_retries(F fn, const RetryPolicy& policy, const Hooks& hooks,
                       const std::function<double()>& jitter01, LogFn log_attempt) -> decltype(fn()) {
    const int attempts = std::max(1, policy.max_attempts);
    for (int attempt = 0;; ++attempt) {
        try {
            auto r = fn();
            log_attempt(attempt, "ok");
            return r;
        } catch (const std::exception& e) {
            auto [outcome, retryable] = classify_error(e);
            log_attempt(attempt, outcome);
            if (!retryable || attempt + 1 >= attempts) throw;
            double exp_s = std::min(policy.cap_seconds, policy.base_seconds * std::pow(2.0, attempt));
            double delay = exp_s * (0.5 + 0.5 * jitter01());  // equal jitter
            hooks.sleep(std::chrono::duration<double>(delay));
        }
    }
}

}  // namespace detail

/// Sliding-window limiter: at most `cap` acquisitions in any 60 s window.
class RateLimiter {
public:
    explicit RateLimiter(int cap) : cap_(std::max(1, cap)) {}

    void acquire(const Hooks& hooks) {
        using namespace std::chrono;
        for (;;) {
            duration<double> wait{};
            {
                std::lock_guard lock(mu_);
                auto now = hooks.now();
                while (!sent_.empty() && now - sent_.front() >= seconds(60)) sent_.pop_front();
                if (sent_.size() < static_cast<std::size_t>(cap_)) {
                    sent_.push_back(now);
                    return;
                }
                wait = duration<double>(sent_.front() + seconds(60) - now);
            }
            hooks.sleep(wait);
        }
    }

private:
    int cap_;
    std::deque<Clock::time_point> sent_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Scripted backend

class ScriptedBackend {
public:
    explicit ScriptedBackend(ScriptedFixture fixture) : fixture_(std::move(fixture)) {}

    struct Call {
        std::string system;
        std::string user;
        std::string reply;
    };

    GenerationResult generate(const std::string& system, const std::string& user) {
        std::string reply;
        long long reasoning = 0;
        switch (fixture_.mode) {
            case ScriptedFixture::Mode::list: {
                std::lock_guard lock(mu_);
                if (cursor_ >= fixture_.replies.size())
                    throw FixtureError("fixture exhausted after " + std::to_string(cursor_) + " replies");
                reply = fixture_.replies[cursor_].text;
                reasoning = fixture_.replies[cursor_].reasoning_tokens;
                ++cursor_;
                break;
            }
            case ScriptedFixture::Mode::by_prompt_hash: {
                auto key = util::hex64(util::fnv1a64(user));
                auto it = fixture_.by_hash.find(key);
                if (it == fixture_.by_hash.end())
                    throw FixtureError("no scripted reply for prompt hash " + key);
                reply = it->second;
                break;
            }
            case ScriptedFixture::Mode::rules: {
                std::string haystack = system + "\n" + user;
                const ScriptedRule* hit = nullptr;
                for (const auto& r : fixture_.rules)
                    if (haystack.find(r.contains) != std::string::npos) {
                        hit = &r;
                        break;
                    }
                if (hit) reply = hit->reply;
                else if (!fixture_.default_reply.empty()) reply = fixture_.default_reply;
                else throw FixtureError("no scripted rule matched and no default reply set");
                break;
            }
            case ScriptedFixture::Mode::synthetic_ideas: {
                reply = synthetic_reply(user);
                reasoning = fixture_.synthetic.reasoning_tokens;
                break;
            }
        }
        GenerationResult out;
        out.text = reply;
        out.prompt_tokens = approx_tokens(system) + approx_tokens(user);
        out.completion_tokens = approx_tokens(reply);
        out.reasoning_tokens = reasoning;
        {
            std::lock_guard lock(mu_);
            calls_.push_back({system, user, reply});
        }
        return out;
    }

    std::vector<Call> calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }

    /// The exact text the synthetic mode emits for idea `k` of `question`.
    std::string synthetic_idea_text(const std::string& question, int k) const {
        auto tag = util::hex64(util::fnv1a64(fixture_.synthetic.salt + "\n" + question)).substr(0, 8);
        return "Synthetic idea " + std::to_string(k) + " for q-" + tag +
               (fixture_.synthetic.salt.empty() ? "" : " by " + fixture_.synthetic.salt);
    }

private:
    static long long approx_tokens(const std::string& s) {
        long long n = 0;
        bool in_word = false;
        for (unsigned char c : s) {
            bool ws = std::isspace(c) != 0;
            if (!ws && !in_word) ++n;
            in_word = !ws;
        }
        return n;
    }

    std::string synthetic_reply(const std::string& user) const {
        static const std::regex item_re(R"(^\d+\. )");
        std::string question;
        int listed = 0;
        for (const auto& line : util::split_lines(user)) {
            if (question.empty() && line.rfind("Question: ", 0) == 0) question = line.substr(10);
            if (std::regex_search(line, item_re)) ++listed;
        }
        if (question.empty())
            throw FixtureError("synthetic_ideas fixture needs the default generation prompt layout");
        int budget = fixture_.synthetic.default_budget;
        if (auto it = fixture_.synthetic.budget_overrides.find(question);
            it != fixture_.synthetic.budget_overrides.end())
            budget = it->second;
        if (listed < budget) return synthetic_idea_text(question, listed + 1);
        return synthetic_idea_text(question, 1);  // verbatim repeat ends the chain
    }

    ScriptedFixture fixture_;
    std::size_t cursor_ = 0;
    std::vector<Call> calls_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP backends

namespace detail {

struct ParsedEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // path prefix, may be empty
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (path.size() > 1 && path.back() == '/') path.pop_back();
    if (path == "/") path.clear();
    return {url.substr(0, path_start), path};
}

inline std::string truncate_payload(const std::string& body, std::size_t limit = 400) {
    if (body.size() <= limit) return body;
    return body.substr(0, limit) + "...[truncated]";
}

}  // namespace detail

/// One HTTP endpoint. A single attempt per call; retry policy lives in the
/// caller. Instances serialize their own requests, callers get parallelism
/// by using distinct models.
class HttpBackend {
public:
    explicit HttpBackend(const ModelSpec& spec) : spec_(spec), ep_(detail::parse_endpoint(spec.endpoint)) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (ep_.base.rfind("https", 0) == 0)
            throw ValidationError("built without TLS support; https endpoint unavailable: " + spec.endpoint);
#endif
        cli_ = std::make_unique<httplib::Client>(ep_.base);
        cli_->set_connection_timeout(10, 0);
        cli_->set_read_timeout(300, 0);
    }

    GenerationResult generate(const std::string& system, const std::string& user, const std::string& api_key) {
        switch (spec_.provider) {
            case Provider::anthropic_compatible: return generate_anthropic(system, user, api_key);
            case Provider::openai_compatible:
            case Provider::local_http: return generate_openai(system, user, api_key);
            case Provider::scripted: break;
        }
        throw Error("HttpBackend cannot serve provider " + std::string(to_string(spec_.provider)));
    }

    std::vector<double> embed(const std::string& model_name, const std::string& text, const std::string& api_key) {
        json body = {{"model", model_name}, {"input", text}};
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        json reply = post_json("/embeddings", body, headers);
        try {
            const auto& arr = reply.at("data").at(0).at("embedding");
            std::vector<double> v;
            v.reserve(arr.size());
            for (const auto& x : arr) v.push_back(x.get<double>());
            return v;
        } catch (const json::exception&) {
            throw MalformedResponseError("embedding response missing data[0].embedding: " +
                                         detail::truncate_payload(reply.dump()));
        }
    }

private:
    GenerationResult generate_openai(const std::string& system, const std::string& user,
                                     const std::string& api_key) {
        json body = {
            {"model", spec_.model_name},
            {"messages",
             json::array({json{{"role", "system"}, {"content", system}}, json{{"role", "user"}, {"content", user}}})},
            {"temperature", spec_.temperature},
            {"max_tokens", spec_.max_output_tokens},
        };
        if (spec_.reasoning && spec_.reasoning->effort_level) body["reasoning_effort"] = *spec_.reasoning->effort_level;
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        json reply = post_json("/chat/completions", body, headers);
        GenerationResult out;
        try {
            out.text = reply.at("choices").at(0).at("message").at("content").is_null()
                           ? ""
                           : reply["choices"][0]["message"]["content"].get<std::string>();
        } catch (const json::exception&) {
            throw MalformedResponseError("chat response missing choices[0].message.content: " +
                                         detail::truncate_payload(reply.dump()));
        }
        if (reply.contains("usage")) {
            const auto& u = reply["usage"];
            out.prompt_tokens = u.value("prompt_tokens", 0LL);
            out.completion_tokens = u.value("completion_tokens", 0LL);
            if (u.contains("completion_tokens_details"))
                out.reasoning_tokens = u["completion_tokens_details"].value("reasoning_tokens", 0LL);
        }
        return out;
    }

    GenerationResult generate_anthropic(const std::string& system, const std::string& user,
                                        const std::string& api_key) {
        json body = {
            {"model", spec_.model_name},
            {"system", system},
            {"messages", json::array({json{{"role", "user"}, {"content", user}}})},
            {"max_tokens", spec_.max_output_tokens},
            {"temperature", spec_.temperature},
        };
        if (spec_.reasoning && spec_.reasoning->budget_tokens)
            body["thinking"] = {{"type", "enabled"}, {"budget_tokens", *spec_.reasoning->budget_tokens}};
        httplib::Headers headers{{"x-api-key", api_key}, {"anthropic-version", "2023-06-01"}};
        json reply = post_json("/messages", body, headers);
        GenerationResult out;
        try {
            for (const auto& block : reply.at("content"))
                if (block.value("type", "") == "text") out.text += block.at("text").get<std::string>();
        } catch (const json::exception&) {
            throw MalformedResponseError("message response missing content blocks: " +
                                         detail::truncate_payload(reply.dump()));
        }
        if (reply.contains("usage")) {
            const auto& u = reply["usage"];
            out.prompt_tokens = u.value("input_tokens", 0LL);
            out.completion_tokens = u.value("output_tokens", 0LL);
            // Stored only when explicitly reported; absence stays 0.
            out.reasoning_tokens = u.value("reasoning_tokens", u.value("thinking_tokens", 0LL));
        }
        return out;
    }

    json post_json(const std::string& sub_path, const json& body, const httplib::Headers& headers) {
        std::lock_guard lock(mu_);
        auto res = cli_->Post(ep_.path + sub_path, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write)
                throw TimeoutError("timeout talking to " + ep_.base + ": " + httplib::to_string(err));
            throw TransportError("transport failure talking to " + ep_.base + ": " + httplib::to_string(err));
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("authentication rejected (" + std::to_string(res->status) + "): " +
                            detail::truncate_payload(res->body));
        if (res->status == 408) throw TimeoutError("request timeout (408)");
        if (res->status == 429) throw RateLimitedError("rate limited (429): " + detail::truncate_payload(res->body));
        if (res->status >= 500)
            throw TransportError("server error (" + std::to_string(res->status) + "): " +
                                 detail::truncate_payload(res->body));
        if (res->status < 200 || res->status >= 300)
            throw HttpStatusError("unexpected status " + std::to_string(res->status) + ": " +
                                  detail::truncate_payload(res->body));
        try {
            return json::parse(res->body);
        } catch (const json::parse_error&) {
            throw MalformedResponseError("response is not JSON: " + detail::truncate_payload(res->body));
        }
    }

    ModelSpec spec_;
    detail::ParsedEndpoint ep_;
    std::unique_ptr<httplib::Client> cli_;
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Client set

/// Registry of callable models for one run. Shareable across tasks; retries,
/// rate limiting and the attempt log are internally synchronized.
class ClientSet {
public:
    explicit ClientSet(std::vector<ModelSpec> specs, Hooks hooks = {}, RetryPolicy policy = {})
        : hooks_(std::move(hooks)), policy_(policy), jitter_rng_(util::make_rng(hooks_.backoff_seed, {"backoff"})) {
        auto errs = validate_specs(specs);
        if (!errs.empty()) throw ValidationError("invalid model specs:\n  " + util::join(errs, "\n  "));
        for (auto& s : specs) {
            auto entry = std::make_unique<Entry>();
            entry->spec = s;
            entry->limiter = std::make_unique<RateLimiter>(s.requests_per_minute);
            if (s.provider == Provider::scripted) entry->scripted = std::make_unique<ScriptedBackend>(s.fixture);
            entries_.emplace(s.model_id, std::move(entry));
        }
    }

    bool has(const std::string& model_id) const { return entries_.count(model_id) > 0; }

    const ModelSpec& spec(const std::string& model_id) const { return entry(model_id).spec; }

    std::vector<std::string> model_ids() const {
        std::vector<std::string> ids;
        for (const auto& [id, _] : entries_) ids.push_back(id);
        return ids;
    }

    /// Scripted backend for a model, or nullptr. Test hooks live here
    /// (captured calls, synthetic idea text).
    ScriptedBackend* scripted(const std::string& model_id) { return entry(model_id).scripted.get(); }

    GenerationResult generate(const std::string& model_id, const std::string& system, const std::string& user) {
        Entry& e = entry(model_id);
        std::string api_key = resolve_api_key(e.spec);  // throws before any network call
        auto t0 = hooks_.now();
        auto log = [&](int attempt, const std::string& outcome) { log_attempt(model_id, attempt, outcome); };
        auto result = detail::call_with_retries(
            [&]() -> GenerationResult {
                if (e.scripted) return e.scripted->generate(system, user);
                e.limiter->acquire(hooks_);
                if (!e.http) {
                    std::lock_guard lock(e.init_mu);
                    if (!e.http) e.http = std::make_unique<HttpBackend>(e.spec);
                }
                return e.http->generate(system, user, api_key);
            },
            policy_, hooks_, [this] { return jitter01(); }, log);
        result.latency_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(hooks_.now() - t0).count();
        return result;
    }

    std::vector<Attempt> attempts() const {
        std::lock_guard lock(log_mu_);
        return attempts_;
    }

    const Hooks& hooks() const { return hooks_; }
    const RetryPolicy& retry_policy() const { return policy_; }

private:
    struct Entry {
        ModelSpec spec;
        std::unique_ptr<RateLimiter> limiter;
        std::unique_ptr<ScriptedBackend> scripted;
        std::unique_ptr<HttpBackend> http;
        std::mutex init_mu;
    };

    Entry& entry(const std::string& model_id) const {
        auto it = entries_.find(model_id);
        if (it == entries_.end()) throw ValidationError("unknown model_id: " + model_id);
        return *it->second;
    }

    static std::string resolve_api_key(const ModelSpec& spec) {
        if (spec.provider == Provider::scripted) return {};
        if (spec.api_key_env.empty()) {
            if (spec.provider == Provider::local_http) return {};
            throw AuthError("model \"" + spec.model_id + "\": api_key_env not configured");
        }
        const char* v = std::getenv(spec.api_key_env.c_str());
        if (!v || !*v)
            throw AuthError("model \"" + spec.model_id + "\": environment variable " + spec.api_key_env +
                            " is not set");
        return v;
    }

    double jitter01() {
        std::lock_guard lock(rng_mu_);
        return util::uniform01(jitter_rng_);
    }

    void log_attempt(const std::string& model_id, int attempt, const std::string& outcome) {
        std::lock_guard lock(log_mu_);
        attempts_.push_back({model_id, attempt, outcome, hooks_.now()});
    }

    std::map<std::string, std::unique_ptr<Entry>> entries_;
    Hooks hooks_;
    RetryPolicy policy_;
    std::mt19937_64 jitter_rng_;
    std::mutex rng_mu_;
    std::vector<Attempt> attempts_;
    mutable std::mutex log_mu_;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbedderSpec {
    enum class Kind { openai_compatible, scripted_map, scripted_hash };

    std::string embedder_id;
    Kind kind = Kind::scripted_hash;
    std::string endpoint;
    std::string api_key_env;
    std::string model_name;
    int dim = 0;  // 0 = accept whatever the first call returns (scripted_hash defaults to 32)
    int requests_per_minute = 120;
    std::map<std::string, std::vector<double>> vectors;  // scripted_map, keyed by normalized text

    static const char* kind_name(Kind k) {
        switch (k) {
            case Kind::openai_compatible: return "openai_compatible";
            case Kind::scripted_map: return "scripted_map";
            case Kind::scripted_hash: return "scripted_hash";
        }
        return "?";
    }

    json to_json() const {
        json j;
        j["embedder_id"] = embedder_id;
        j["kind"] = kind_name(kind);
        if (!endpoint.empty()) j["endpoint"] = endpoint;
        if (!api_key_env.empty()) j["api_key_env"] = api_key_env;
        if (!model_name.empty()) j["model_name"] = model_name;
        j["dim"] = dim;
        j["requests_per_minute"] = requests_per_minute;
        if (!vectors.empty()) j["vectors"] = vectors;
        return j;
    }

    static EmbedderSpec from_json(const json& j) {
        EmbedderSpec s;
        s.embedder_id = j.at("embedder_id").get<std::string>();
        std::string k = j.value("kind", "scripted_hash");
        if (k == "openai_compatible") s.kind = Kind::openai_compatible;
        else if (k == "scripted_map") s.kind = Kind::scripted_map;
        else if (k == "scripted_hash") s.kind = Kind::scripted_hash;
        else throw ParseError("embedder \"" + s.embedder_id + "\": unknown kind " + k);
        s.endpoint = j.value("endpoint", "");
        s.api_key_env = j.value("api_key_env", "");
        s.model_name = j.value("model_name", "");
        s.dim = j.value("dim", 0);
        s.requests_per_minute = j.value("requests_per_minute", 120);
        if (j.contains("vectors"))
            for (auto& [text, vec] : j["vectors"].items())
                s.vectors[util::normalize_text(text)] = vec.get<std::vector<double>>();
        return s;
    }
};

/// Embedding access with a two-level cache: in-memory, then content-addressed
/// files under `cache_dir` (safe to delete; they are re-created on demand).
/// Texts are normalized (trim, case, whitespace) before lookup so trivially
/// reformatted ideas never re-bill.
class Embedder {
public:
    explicit Embedder(EmbedderSpec spec, std::filesystem::path cache_dir = {}, Hooks hooks = {},
                      RetryPolicy policy = {})
        : spec_(std::move(spec)), cache_dir_(std::move(cache_dir)), hooks_(std::move(hooks)), policy_(policy),
          jitter_rng_(util::make_rng(hooks_.backoff_seed, {"embed-backoff"})) {
        if (spec_.kind == EmbedderSpec::Kind::scripted_map) {
            std::map<std::string, std::vector<double>> normalized;
            for (auto& [k, v] : spec_.vectors) normalized[util::normalize_text(k)] = v;
            spec_.vectors = std::move(normalized);
        }
        if (!cache_dir_.empty()) std::filesystem::create_directories(cache_dir_);
    }

    const EmbedderSpec& spec() const { return spec_; }

    std::vector<double> embed(const std::string& text) {
        std::string key = util::normalize_text(text);
        if (key.empty()) throw ValidationError("embed: text is empty");
        {
            std::lock_guard lock(mu_);
            if (auto it = memory_.find(key); it != memory_.end()) return it->second;
        }
        if (auto v = load_from_disk(key)) {
            check_dim(*v);
            std::lock_guard lock(mu_);
            memory_[key] = *v;
            return *v;
        }
        std::vector<double> v = compute(key);
        check_dim(v);
        {
            std::lock_guard lock(mu_);
            memory_[key] = v;
        }
        store_to_disk(key, v);
        return v;
    }

    std::size_t backend_calls() const {
        std::lock_guard lock(mu_);
        return backend_calls_;
    }

private:
    void check_dim(const std::vector<double>& v) {
        std::lock_guard lock(mu_);
        int expect = spec_.dim > 0 ? spec_.dim : seen_dim_;
        if (expect > 0 && static_cast<int>(v.size()) != expect)
            throw DimensionMismatchError("embedder \"" + spec_.embedder_id + "\" returned dimension " +
                                         std::to_string(v.size()) + ", expected " + std::to_string(expect));
        if (seen_dim_ == 0) seen_dim_ = static_cast<int>(v.size());
    }

    std::vector<double> compute(const std::string& key) {
        {
            std::lock_guard lock(mu_);
            ++backend_calls_;
        }
        switch (spec_.kind) {
            case EmbedderSpec::Kind::scripted_map: {
                auto it = spec_.vectors.find(key);
                if (it == spec_.vectors.end())
                    throw FixtureError("no scripted embedding for text: " + key);
                return it->second;
            }
            case EmbedderSpec::Kind::scripted_hash: {
                int dim = spec_.dim > 0 ? spec_.dim : 32;
                auto rng = util::make_rng(util::fnv1a64(spec_.embedder_id), {key});
                std::vector<double> v(static_cast<std::size_t>(dim));
                double norm2 = 0.0;
                for (auto& x : v) {
                    x = util::gaussian(rng);
                    norm2 += x * x;
                }
                double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
                for (auto& x : v) x *= inv;
                return v;
            }
            case EmbedderSpec::Kind::openai_compatible: {
                std::string api_key;
                if (!spec_.api_key_env.empty()) {
                    const char* v = std::getenv(spec_.api_key_env.c_str());
                    if (!v || !*v)
                        throw AuthError("embedder \"" + spec_.embedder_id + "\": environment variable " +
                                        spec_.api_key_env + " is not set");
                    api_key = v;
                }
                if (!http_) {
                    ModelSpec dummy;
                    dummy.model_id = spec_.embedder_id;
                    dummy.provider = Provider::openai_compatible;
                    dummy.endpoint = spec_.endpoint;
                    dummy.model_name = spec_.model_name;
                    http_ = std::make_unique<HttpBackend>(dummy);
                    limiter_ = std::make_unique<RateLimiter>(spec_.requests_per_minute);
                }
                auto jitter = [this] {
                    std::lock_guard lock(rng_mu_);
                    return util::uniform01(jitter_rng_);
                };
                return detail::call_with_retries(
                    [&] {
                        limiter_->acquire(hooks_);
                        return http_->embed(spec_.model_name, key, api_key);
                    },
                    policy_, hooks_, jitter, [](int, const std::string&) {});
            }
        }
        throw Error("unreachable embedder kind");
    }

    std::filesystem::path disk_path(const std::string& key) const {
        auto h = util::hex64(util::fnv1a64(spec_.embedder_id + "\n" + key));
        return cache_dir_ / (h + ".json");
    }

    std::optional<std::vector<double>> load_from_disk(const std::string& key) const {
        if (cache_dir_.empty()) return std::nullopt;
        std::ifstream in(disk_path(key));
        if (!in) return std::nullopt;
        try {
            json j;
            in >> j;
            if (j.value("embedder", "") != spec_.embedder_id || j.value("text", "") != key) return std::nullopt;
            return j.at("vec").get<std::vector<double>>();
        } catch (...) {
            return std::nullopt;  // unreadable cache entries are treated as misses
        }
    }

    void store_to_disk(const std::string& key, const std::vector<double>& v) const {
        if (cache_dir_.empty()) return;
        json j = {{"v", 1}, {"embedder", spec_.embedder_id}, {"text", key}, {"vec", v}};
        auto target = disk_path(key);
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            out << j.dump();
        }
        std::error_code ec;
        std::filesystem::rename(tmp, target, ec);
    }

    EmbedderSpec spec_;
    std::filesystem::path cache_dir_;
    Hooks hooks_;
    RetryPolicy policy_;
    std::mt19937_64 jitter_rng_;
    std::mutex rng_mu_;
    std::map<std::string, std::vector<double>> memory_;
    std::size_t backend_calls_ = 0;
    int seen_dim_ = 0;
    std::unique_ptr<HttpBackend> http_;
    std::unique_ptr<RateLimiter> limiter_;
    mutable std::mutex mu_;
};

}  // namespace ideabench::clients
