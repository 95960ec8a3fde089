#pragma once

#include "rae/jsonl.hpp"
#include "rae/kgstore.hpp"
#include "rae/scorer.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rae {

struct RetrievalConfig {
    int hops = 4;
    int beam_width = 2;
    int max_relations_per_hop = 64;
    // Adds log2 p(question | start entity) to the final score. Constant per
    // question, so it never changes the selected chain.
    bool include_question_prior = false;
    std::size_t parallelism = 1;

    void validate() const;
};

// log2 p(relation | context) with and without the question in the context.
struct HopScore {
    double logp_cond = 0.0;
    double logp_uncond = 0.0;

    double log_ratio() const { return logp_cond - logp_uncond; }
};

// A partial or complete path explored by the search.
struct PathCandidate {
    std::vector<Triple> links;
    std::vector<HopScore> hops;
    double cum_logp_cond = 0.0;
    double cum_logp_uncond = 0.0;
    bool dead_end = false;

    double cum_log_ratio() const { return cum_logp_cond - cum_logp_uncond; }
    void extend(const Triple& link, const HopScore& score);
};

// Strict ordering used for beam selection and final argmax: higher
// cum_log_ratio first, then lexicographic on the (relation, tail) sequence.
bool ranks_before(const PathCandidate& a, const PathCandidate& b);

struct ScoredSubgraph {
    std::string question;
    FactChain chain;
    double log_ratio = 0.0;
    double mi_score = 0.0;
    std::vector<Triple> edited_members;
    std::vector<HopScore> per_hop;
    bool dead_end = false;
    std::optional<double> question_prior;
};

// Scoring context: question (omitted when empty), verbalized prefix facts,
// then the head entity, separated by single spaces.
std::string scoring_context(std::string_view question, std::span<const Triple> prefix, std::string_view head);

HopScore relation_log_ratio(const Scorer& scorer, std::string_view question, std::span<const Triple> prefix,
                            std::string_view head, std::string_view relation);

// rho * log2(rho) with rho = 2^log_ratio; 0 in the rho -> 0 limit.
double mi_score(double log_ratio);

ScoredSubgraph beam_search_retrieve(const EditedKG& kg, const Scorer& scorer, std::string_view question,
                                    std::string_view start_entity, const RetrievalConfig& config);

inline constexpr std::size_t kDefaultPathBound = 100000;

// Scores every maximal path (n links, or fewer when it dead-ends) and returns
// the argmax under ranks_before. Throws OracleError past `path_bound` paths.
ScoredSubgraph exhaustive_retrieve(const EditedKG& kg, const Scorer& scorer, std::string_view question,
                                   std::string_view start_entity, int hops,
                                   std::size_t path_bound = kDefaultPathBound, bool include_question_prior = false);

json scored_subgraph_to_json(const ScoredSubgraph& s);

}  // namespace rae
