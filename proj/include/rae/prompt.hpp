#pragma once

#include "rae/kgstore.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rae {

// A worked demonstration rendered before the real question.
struct Exemplar {
    std::vector<Triple> facts;
    std::string question;
    std::string answer;
};

// Editing template. `body` holds exactly one {{facts}} and one {{question}}
// placeholder; facts render one verbalized triple per line and the question
// always ends in '?'.
class PromptTemplate {
public:
    static constexpr std::string_view kFactsSlot = "{{facts}}";
    static constexpr std::string_view kQuestionSlot = "{{question}}";

    // Throws ValidationError unless both placeholders occur exactly once.
    explicit PromptTemplate(std::string body, std::string preamble = {}, std::vector<Exemplar> exemplars = {});

    // Template file: plain text body, placeholders as above.
    static PromptTemplate load(const std::filesystem::path& path);

    // "Given fact: ..." body with three embedded demonstrations.
    static const PromptTemplate& standard();

    const std::string& body() const { return body_; }
    const std::string& preamble() const { return preamble_; }
    const std::vector<Exemplar>& exemplars() const { return exemplars_; }

    // Body with both slots filled; no preamble or demonstrations.
    std::string fill(std::string_view question, std::span<const Triple> facts) const;
    // Preamble followed by every rendered demonstration.
    std::string demonstrations() const;

private:
    std::string preamble_;
    std::string body_;
    std::vector<Exemplar> exemplars_;
};

std::string format_facts(std::span<const Triple> facts);
std::string format_question(std::string_view question);

// Demonstrations, then the filled body. Deterministic.
std::string build_edit_prompt(const PromptTemplate& tmpl, std::string_view question, const FactChain& facts);
std::string build_edit_prompt(const PromptTemplate& tmpl, std::string_view question, std::span<const Triple> facts);

}  // namespace rae
