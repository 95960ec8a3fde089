#pragma once

#include "rae/jsonl.hpp"
#include "rae/kgstore.hpp"
#include "rae/prompt.hpp"
#include "rae/scorer.hpp"

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

namespace rae {

// prefixes[i] holds the first i + 1 links of the chain.
struct PrefixSet {
    std::vector<FactChain> prefixes;
};

struct PruneReport {
    std::vector<std::pair<std::size_t, double>> entropies;  // (prefix length, normalized entropy)
    std::size_t selected_length = 0;
    FactChain selected_chain;
};

PrefixSet prefix_sets(const FactChain& chain);

// Shannon entropy over the distribution's outcomes (tail mass counts as one)
// divided by log2 of the outcome count; 0 for a single outcome.
double normalized_entropy(const TokenDist& dist);

// Normalized entropy of the first generated token under the editing prompt.
double editing_entropy(const Scorer& scorer, std::string_view question, const FactChain& facts,
                       const PromptTemplate& tmpl = PromptTemplate::standard());

// Argmin of editing_entropy over the prefix set; ties go to the shortest prefix.
PruneReport prune(const Scorer& scorer, std::string_view question, const FactChain& chain,
                  const PromptTemplate& tmpl = PromptTemplate::standard(), std::size_t parallelism = 1);

json prune_report_to_json(const PruneReport& report);

}  // namespace rae
