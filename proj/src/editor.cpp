#include "rae/editor.hpp"

#include "rae/error.hpp"
#include "rae/text.hpp"

#include <algorithm>

namespace rae {

MockGenerator::MockGenerator(std::map<std::string, std::string> completions, std::string fallback)
    : fallback_(std::move(fallback)) {
    for (auto& [prompt, completion] : completions) {
        completions_.insert_or_assign(collapse_whitespace(prompt), std::move(completion));
    }
}

Generation MockGenerator::generate(std::string_view prompt, int max_new_tokens) const {
    if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be at least 1");
    auto it = completions_.find(collapse_whitespace(prompt));
    const std::string& completion = it == completions_.end() ? fallback_ : it->second;
    Generation g;
    g.tokens = split_whitespace(completion);
    if (g.tokens.size() > static_cast<std::size_t>(max_new_tokens)) g.tokens.resize(max_new_tokens);
    g.text = join(g.tokens, " ");
    return g;
}

std::shared_ptr<const MockGenerator> load_mock_generator(const std::filesystem::path& path) {
    std::map<std::string, std::string> completions;
    std::string fallback;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        if (auto f = r.find("fallback"); f != r.end()) {
            fallback = required_string(r, "fallback", line);
            return;
        }
        completions.insert_or_assign(required_string(r, "prompt", line), required_string(r, "completion", line));
    });
    return std::make_shared<const MockGenerator>(std::move(completions), std::move(fallback));
}

void GenerationBackend::validate() const {
    if (!generator) throw ValidationError("generation backend has no generator");
    if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be at least 1");
}

std::optional<std::string> match_edited_answer(std::span<const std::string> tokens, bool whitespace_tokens,
                                               std::string_view target, const std::vector<std::string>& aliases,
                                               int max_tokens) {
    const std::string folded_target = fold_for_match(target);
    if (folded_target.empty()) throw ValidationError("edited-answer target is empty");
    const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(std::max(max_tokens, 0)));
    std::string window;
    for (std::size_t i = 0; i < n; ++i) {
        if (i && whitespace_tokens) window.push_back(' ');
        window += tokens[i];
    }
    const std::string haystack = fold_for_match(window);
    if (haystack.find(folded_target) != std::string::npos) return std::string(target);
    for (const auto& alias : aliases) {
        const std::string folded = fold_for_match(alias);
        if (!folded.empty() && haystack.find(folded) != std::string::npos) return alias;
    }
    return std::nullopt;
}

bool check_edited_answer(std::string_view generated, std::string_view target,
                         const std::vector<std::string>& aliases, int max_tokens) {
    const auto tokens = split_whitespace(generated);
    return match_edited_answer(tokens, true, target, aliases, max_tokens).has_value();
}

EditOutcome answer_with_edit(const GenerationBackend& backend, const PromptTemplate& tmpl, std::string_view question,
                             const FactChain& facts, std::string_view target,
                             const std::vector<std::string>& aliases) {
    backend.validate();
    EditOutcome outcome;
    outcome.prompt = build_edit_prompt(tmpl, question, facts);
    Generation g = backend.generator->generate(outcome.prompt, backend.max_new_tokens);
    outcome.generated = g.text;
    outcome.matched_alias =
        match_edited_answer(g.tokens, g.whitespace_tokens, target, aliases, backend.max_new_tokens);
    outcome.matched = outcome.matched_alias.has_value();
    return outcome;
}

json edit_outcome_to_json(const EditOutcome& outcome) {
    return json{{"prompt", outcome.prompt},
                {"generated", outcome.generated},
                {"matched", outcome.matched},
                {"matched_alias", outcome.matched_alias ? json(*outcome.matched_alias) : json(nullptr)}};
}

}  // namespace rae
