#pragma once

// The idea-source abstraction the run loop draws candidates from, plus the
// shared generation prompt. Prior accepted ideas are always presented as an
// anonymous numbered list: sources never reveal which model wrote what.

#include <string>
#include <string_view>
#include <vector>

#include "ideabench/clients.hpp"
#include "ideabench/core.hpp"
#include "ideabench/scoring.hpp"

namespace ideabench::bench {

inline constexpr std::string_view kDefaultGenerationSystem =
    "You are a scientific ideation assistant. Propose exactly one idea per reply, stated concisely.";

/// Placeholders: {question} {ideas}
inline constexpr std::string_view kDefaultGenerationUserTemplate =
    R"(Question: {question}

Previously accepted ideas:
{ideas}

Propose one new idea that coherently answers the question and is clearly distinct from every idea listed above. Reply with the idea text only.)";

struct GenerationPrompts {
    std::string system{kDefaultGenerationSystem};
    std::string user_template{kDefaultGenerationUserTemplate};

    bool operator==(const GenerationPrompts&) const = default;
};

inline std::string format_idea_list(const std::vector<std::string>& ideas) {
    if (ideas.empty()) return "None yet.";
    std::string out;
    for (std::size_t i = 0; i < ideas.size(); ++i) {
        out += std::to_string(i + 1) + ". " + ideas[i];
        if (i + 1 < ideas.size()) out += '\n';
    }
    return out;
}

inline std::string build_generation_prompt(const GenerationPrompts& prompts, const std::string& question_text,
                                           const std::vector<std::string>& accepted) {
    return scoring::render_template(prompts.user_template,
                                    {{"question", question_text}, {"ideas", format_idea_list(accepted)}});
}

struct IdeaCandidate {
    std::string text;
    std::string model_id;  // the model that actually produced the text
    clients::GenerationResult gen;
};

/// One pluggable idea producer per strategy. `accepted` holds the texts of
/// all previously accepted ideas for this question, in acceptance order.
class IdeaSource {
public:
    virtual ~IdeaSource() = default;
    virtual std::string strategy_id() const = 0;
    virtual IdeaCandidate next_idea(const core::Question& question, const std::vector<std::string>& accepted,
                                    int step_index) = 0;
};

class SingleModelSource final : public IdeaSource {
public:
    SingleModelSource(clients::ClientSet& clients, std::string model_id, GenerationPrompts prompts = {},
                      std::string strategy_id = {})
        : clients_(clients), model_id_(std::move(model_id)), prompts_(std::move(prompts)),
          strategy_id_(strategy_id.empty() ? model_id_ : std::move(strategy_id)) {}

    std::string strategy_id() const override { return strategy_id_; }

    IdeaCandidate next_idea(const core::Question& question, const std::vector<std::string>& accepted,
                            int) override {
        auto gen = clients_.generate(model_id_, prompts_.system,
                                     build_generation_prompt(prompts_, question.text, accepted));
        return {gen.text, model_id_, gen};
    }

private:
    clients::ClientSet& clients_;
    std::string model_id_;
    GenerationPrompts prompts_;
    std::string strategy_id_;
};

}  // namespace ideabench::bench
