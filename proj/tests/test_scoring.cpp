#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ideabench/clients.hpp"
#include "ideabench/scoring.hpp"

using namespace ideabench;
using namespace ideabench::scoring;
using core::TerminationReason;

namespace {

// Independent oracle: plain loops, no reuse of the library's cosine helper.
double brute_force_novelty(const std::vector<double>& v, const std::vector<std::vector<double>>& priors) {
    if (priors.empty()) return 1.0;
    double max_sim = -1.0;
    for (const auto& p : priors) {
        double dot = 0, nv = 0, np = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            dot += v[i] * p[i];
            nv += v[i] * v[i];
            np += p[i] * p[i];
        }
        double c = dot / (std::sqrt(nv) * std::sqrt(np));
        if (c > 1.0) c = 1.0;
        if (c < -1.0) c = -1.0;
        if (c > max_sim) max_sim = c;
    }
    double e = 1.0 - max_sim;
    if (e < 0.0) e = 0.0;
    if (e > 1.0) e = 1.0;
    return e;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::vector<double> v(dim);
    bool nonzero = false;
    for (auto& x : v) {
        x = util::gaussian(rng);
        nonzero = nonzero || x != 0.0;
    }
    if (!nonzero) v[0] = 1.0;
    return v;
}

}  // namespace

TEST_CASE("embedding novelty: spec examples") {
    std::vector<double> v{1.0, 0.0};
    CHECK(embedding_novelty(v, {{1.0, 0.0}}) == doctest::Approx(0.0));  // identical prior
    CHECK(embedding_novelty(v, {}) == doctest::Approx(1.0));            // empty prior set
    double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    double got = embedding_novelty(v, {{0.0, 1.0}, {inv_sqrt2, inv_sqrt2}});
    CHECK(got == doctest::Approx(0.29289).epsilon(1e-4));
    CHECK(std::abs(got - (1.0 - inv_sqrt2)) < 1e-9);
}

TEST_CASE("embedding novelty equals the brute-force oracle on random sets") {
    auto rng = util::make_rng(99, {"novelty-oracle"});
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t dim = 1 + util::uniform_index(rng, 16);
        std::size_t n = util::uniform_index(rng, 65);
        auto v = random_vector(rng, dim);
        std::vector<std::vector<double>> priors;
        for (std::size_t i = 0; i < n; ++i) priors.push_back(random_vector(rng, dim));
        CHECK(std::abs(embedding_novelty(v, priors) - brute_force_novelty(v, priors)) < 1e-9);
    }
}

TEST_CASE("adding a prior never increases novelty") {
    auto rng = util::make_rng(7, {"monotone"});
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 2 + util::uniform_index(rng, 8);
        auto v = random_vector(rng, dim);
        std::vector<std::vector<double>> priors;
        double prev = embedding_novelty(v, priors);
        for (int k = 0; k < 6; ++k) {
            priors.push_back(random_vector(rng, dim));
            double cur = embedding_novelty(v, priors);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("embedding novelty stays in range even for anticorrelated vectors") {
    std::vector<double> v{1.0, 0.0};
    double e = embedding_novelty(v, {{-1.0, 0.0}});
    CHECK(e == doctest::Approx(1.0));  // raw 1 - (-1) = 2, clamped
}

TEST_CASE("embedding novelty rejects bad vectors") {
    CHECK_THROWS_AS(embedding_novelty({1.0, 0.0}, {{1.0, 0.0, 0.0}}), ValidationError);
    CHECK_THROWS_AS(embedding_novelty({0.0, 0.0}, {{1.0, 0.0}}), ValidationError);
}

// ---------------------------------------------------------------------------
// Judge-based scores

TEST_CASE("llm novelty of the first idea is 1.0 with zero judge calls") {
    clients::ClientSet set({testutil::scripted_judge_spec()});
    scoring::JudgeSpec spec = testutil::scripted_judge();
    Judge judge(set, spec);
    CHECK(judge.llm_novelty("q", "candidate", {}) == 1.0);
    CHECK(set.attempts().empty());
}

TEST_CASE("llm novelty is one minus the max similarity") {
    auto spec = testutil::list_model("judge", {"0.2", "0.9"});
    clients::ClientSet set({spec});
    scoring::JudgeSpec js;
    js.model = spec;
    js.similarity_parallelism = 1;  // keep the list fixture ordering meaningful
    Judge judge(set, js);
    CHECK(judge.llm_novelty("q", "new idea", {"prior one", "prior two"}) == doctest::Approx(0.1));
}

TEST_CASE("unparseable judge replies are retried, then fail with the raw text") {
    auto spec = testutil::list_model("judge", {"very similar", "very similar", "0.5"});
    clients::ClientSet set({spec});
    scoring::JudgeSpec js;
    js.model = spec;
    js.similarity_parallelism = 1;
    Judge judge(set, js);
    CHECK(judge.llm_novelty("q", "cand", {"prior"}) == doctest::Approx(0.5));

    auto stubborn = testutil::list_model("judge", {"nope", "still nope", "no numbers here"});
    clients::ClientSet set2({stubborn});
    scoring::JudgeSpec js2;
    js2.model = stubborn;
    js2.similarity_parallelism = 1;
    Judge judge2(set2, js2);
    try {
        judge2.llm_novelty("q", "cand", {"prior"});
        FAIL("expected ScoringError");
    } catch (const ScoringError& e) {
        CHECK(e.raw_reply == "no numbers here");
        CHECK(std::string(e.what()).find("no numbers here") != std::string::npos);
    }
}

TEST_CASE("coherence: empty candidate scores 0 without a judge call") {
    clients::ClientSet set({testutil::scripted_judge_spec()});
    Judge judge(set, testutil::scripted_judge());
    CHECK(judge.coherence("q", "") == 0.0);
    CHECK(judge.coherence("q", "  \n ") == 0.0);
    CHECK(set.attempts().empty());
}

TEST_CASE("coherence parses and clamps with a warning") {
    clients::ClientSet set({testutil::scripted_judge_spec("85")});
    Judge judge(set, testutil::scripted_judge("85"));
    CHECK(judge.coherence("q", "a fine answer") == doctest::Approx(85.0));

    std::vector<std::string> warnings;
    clients::ClientSet set2({testutil::scripted_judge_spec("120")});
    scoring::JudgeSpec js = testutil::scripted_judge("120");
    Judge judge2(set2, js, [&](const std::string& w) { warnings.push_back(w); });
    CHECK(judge2.coherence("q", "overrated answer") == doctest::Approx(100.0));
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("clamped") != std::string::npos);
}

TEST_CASE("scores stay in range under adversarial judge replies") {
    for (const char* reply : {"-3", "1e9", "0.5 because reasons", "about 250 I'd say", "-0.0001"}) {
        clients::ClientSet set({testutil::scripted_judge_spec(reply, reply)});
        scoring::JudgeSpec js = testutil::scripted_judge(reply, reply);
        Judge judge(set, js, [](const std::string&) {});
        double c = judge.coherence("q", "text");
        CHECK(c >= 0.0);
        CHECK(c <= 100.0);
        double l = judge.llm_novelty("q", "text", {"prior"});
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
    }
}

// ---------------------------------------------------------------------------
// Termination rule

TEST_CASE("termination thresholds are strict inequalities") {
    core::Thresholds th;
    CHECK(should_terminate({0.14, 1.0, 80.0}, th, 0) == TerminationReason::embed_below);
    CHECK(should_terminate({0.50, 1.0, 14.0}, th, 0) == TerminationReason::coherence_below);
    CHECK(should_terminate({0.15, 1.0, 15.0}, th, 0) == TerminationReason::none);  // boundaries continue
    CHECK(should_terminate({0.1499999, 1.0, 80.0}, th, 0) == TerminationReason::embed_below);
    CHECK(should_terminate({0.50, 1.0, 14.9999}, th, 0) == TerminationReason::coherence_below);
}

TEST_CASE("simultaneous triggers report in the documented priority order") {
    core::Thresholds th;
    th.tau_llm_novelty = 0.5;
    CHECK(should_terminate({0.01, 0.01, 1.0}, th, 0) == TerminationReason::coherence_below);
    CHECK(should_terminate({0.01, 0.01, 80.0}, th, 0) == TerminationReason::embed_below);
    CHECK(should_terminate({0.90, 0.01, 80.0}, th, 0) == TerminationReason::llm_novelty_below);
}

TEST_CASE("llm novelty gate only fires when enabled") {
    core::Thresholds off;
    CHECK(should_terminate({0.9, 0.0, 80.0}, off, 0) == TerminationReason::none);
    core::Thresholds on;
    on.tau_llm_novelty = 0.3;
    CHECK(should_terminate({0.9, 0.2, 80.0}, on, 0) == TerminationReason::llm_novelty_below);
    CHECK(should_terminate({0.9, 0.3, 80.0}, on, 0) == TerminationReason::none);  // strict
}

TEST_CASE("step cap fires only when no threshold did") {
    core::Thresholds th;
    th.max_steps = 3;
    CHECK(should_terminate({0.9, 0.9, 80.0}, th, 0) == TerminationReason::none);
    CHECK(should_terminate({0.9, 0.9, 80.0}, th, 1) == TerminationReason::none);
    CHECK(should_terminate({0.9, 0.9, 80.0}, th, 2) == TerminationReason::step_cap);
    CHECK(should_terminate({0.01, 0.9, 80.0}, th, 2) == TerminationReason::embed_below);
    core::Thresholds uncapped;
    uncapped.max_steps.reset();
    CHECK(should_terminate({0.9, 0.9, 80.0}, uncapped, 1000000) == TerminationReason::none);
}

TEST_CASE("termination is a pure function") {
    core::Thresholds th;
    th.tau_llm_novelty = 0.4;
    th.max_steps = 10;
    auto rng = util::make_rng(5, {"pure"});
    for (int i = 0; i < 200; ++i) {
        ScoreTriple s{util::uniform01(rng), util::uniform01(rng), util::uniform01(rng) * 100.0};
        int step = static_cast<int>(util::uniform_index(rng, 12));
        CHECK(should_terminate(s, th, step) == should_terminate(s, th, step));
    }
}
