#pragma once

#include "rae/generator.hpp"
#include "rae/jsonl.hpp"
#include "rae/kgstore.hpp"
#include "rae/prompt.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rae {

inline constexpr int kDefaultMaxNewTokens = 10;

struct GenerationBackend {
    std::shared_ptr<const Generator> generator;
    int max_new_tokens = kDefaultMaxNewTokens;

    void validate() const;
};

struct EditOutcome {
    std::string prompt;
    std::string generated;
    bool matched = false;
    std::optional<std::string> matched_alias;
};

// Target or alias (case-folded, whitespace-collapsed) occurring as a substring
// of the first `max_tokens` tokens. `whitespace_tokens` joins tokens with a
// space; otherwise they are concatenated as the backend reported them.
std::optional<std::string> match_edited_answer(std::span<const std::string> tokens, bool whitespace_tokens,
                                               std::string_view target, const std::vector<std::string>& aliases,
                                               int max_tokens);

// Whitespace-tokenizes `generated`.
bool check_edited_answer(std::string_view generated, std::string_view target,
                         const std::vector<std::string>& aliases, int max_tokens = kDefaultMaxNewTokens);

EditOutcome answer_with_edit(const GenerationBackend& backend, const PromptTemplate& tmpl, std::string_view question,
                             const FactChain& facts, std::string_view target,
                             const std::vector<std::string>& aliases = {});

json edit_outcome_to_json(const EditOutcome& outcome);

}  // namespace rae
