#pragma once

// Shared fixtures for the test suites: temp run directories, scripted
// judges/models and small config builders.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ideabench/clients.hpp"
#include "ideabench/config.hpp"
#include "ideabench/core.hpp"
#include "ideabench/scoring.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(IDEABENCH_SOURCE_DIR); }
inline fs::path bundled_questions() { return source_dir() / "data" / "questions.jsonl"; }
inline fs::path cross_task_csv() { return source_dir() / "tests" / "data" / "cross_task_means.csv"; }

/// Unique temp directory removed on destruction.
struct TempDir {
    fs::path path;

    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto stamp = std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
        path = fs::temp_directory_path() / ("ideabench-test-" + stamp);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline ideabench::core::Question make_question(std::string id, std::string text,
                                               ideabench::core::Domain domain = ideabench::core::Domain::Chemistry,
                                               std::optional<ideabench::core::Subdomain> sub = {}) {
    return {std::move(id), std::move(text), domain, sub};
}

/// A judge model whose replies depend only on which template produced the
/// prompt: coherence prompts get `coherence_reply`, similarity prompts get
/// `similarity_reply`. Pure, so safe under any parallelism.
inline ideabench::clients::ModelSpec scripted_judge_spec(std::string coherence_reply = "82",
                                                         std::string similarity_reply = "0.10",
                                                         std::string model_id = "judge") {
    ideabench::clients::ModelSpec spec;
    spec.model_id = std::move(model_id);
    spec.provider = ideabench::clients::Provider::scripted;
    spec.fixture.mode = ideabench::clients::ScriptedFixture::Mode::rules;
    spec.fixture.rules = {
        {"Rate how conceptually similar", std::move(similarity_reply)},
        {"Rate from 0 to 100", std::move(coherence_reply)},
    };
    return spec;
}

inline ideabench::scoring::JudgeSpec scripted_judge(std::string coherence_reply = "82",
                                                    std::string similarity_reply = "0.10") {
    ideabench::scoring::JudgeSpec js;
    js.model = scripted_judge_spec(std::move(coherence_reply), std::move(similarity_reply));
    return js;
}

inline ideabench::clients::ModelSpec list_model(std::string model_id, std::vector<std::string> replies) {
    ideabench::clients::ModelSpec spec;
    spec.model_id = std::move(model_id);
    spec.provider = ideabench::clients::Provider::scripted;
    spec.fixture = ideabench::clients::ScriptedFixture::list(std::move(replies));
    return spec;
}

inline ideabench::clients::ModelSpec synthetic_model(std::string model_id, int default_budget,
                                                     std::map<std::string, int> overrides = {},
                                                     long long reasoning_tokens = 0) {
    ideabench::clients::ModelSpec spec;
    spec.model_id = model_id;
    spec.provider = ideabench::clients::Provider::scripted;
    spec.fixture.mode = ideabench::clients::ScriptedFixture::Mode::synthetic_ideas;
    spec.fixture.synthetic.default_budget = default_budget;
    spec.fixture.synthetic.budget_overrides = std::move(overrides);
    spec.fixture.synthetic.reasoning_tokens = reasoning_tokens;
    spec.fixture.synthetic.salt = model_id;
    return spec;
}

inline ideabench::clients::EmbedderSpec hash_embedder(int dim = 24) {
    ideabench::clients::EmbedderSpec e;
    e.embedder_id = "hash-test";
    e.kind = ideabench::clients::EmbedderSpec::Kind::scripted_hash;
    e.dim = dim;
    return e;
}

}  // namespace testutil
