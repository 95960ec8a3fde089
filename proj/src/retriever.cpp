#include "rae/retriever.hpp"

#include "rae/error.hpp"
#include "rae/parallel.hpp"
#include "rae/text.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace rae {

namespace {

bool uses(const std::vector<Triple>& links, const Triple& t) {
    return std::find(links.begin(), links.end(), t) != links.end();
}

// Outgoing edges of `entity` not already on the path.
std::vector<OutEdge> available_edges(const EditedKG& kg, const std::string& entity, const std::vector<Triple>& links) {
    std::vector<OutEdge> out;
    for (const OutEdge& e : kg.outgoing(entity)) {
        if (!uses(links, Triple(entity, e.relation, e.tail))) out.push_back(e);
    }
    return out;
}

// Distinct relations in sorted order, each with its tails sorted.
std::map<std::string, std::vector<std::string>> group_by_relation(const std::vector<OutEdge>& edges) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const OutEdge& e : edges) groups[e.relation].push_back(e.tail);
    for (auto& [rel, tails] : groups) std::sort(tails.begin(), tails.end());
    return groups;
}

std::size_t distinct_relations(std::span<const OutEdge> edges) {
    std::set<std::string_view> rels;
    for (const OutEdge& e : edges) rels.insert(e.relation);
    return rels.size();
}

const std::string& frontier(const PathCandidate& c, const std::string& start) {
    return c.links.empty() ? start : c.links.back().tail();
}

ScoredSubgraph finish(const EditedKG& kg, const Scorer& scorer, std::string_view question, const std::string& start,
                      const PathCandidate& best, bool include_question_prior) {
    ScoredSubgraph out{std::string(question), FactChain::validate(best.links), 0.0, 0.0, {}, {}, false, {}};
    out.per_hop = best.hops;
    out.dead_end = best.dead_end;
    out.log_ratio = best.cum_log_ratio();
    if (include_question_prior) {
        out.question_prior = scorer.sequence_logprob(start, question);
        out.log_ratio += *out.question_prior;
    }
    out.mi_score = mi_score(out.log_ratio);
    for (const Triple& t : best.links) {
        if (kg.is_edited(t)) out.edited_members.push_back(t);
    }
    return out;
}

std::string checked_start(const EditedKG& kg, std::string_view question, std::string_view start_entity) {
    if (collapse_whitespace(question).empty()) throw ValidationError("question is empty");
    std::string start = normalize_label(start_entity);
    if (kg.outgoing(start).empty()) {
        throw RetrievalError("start entity '" + start + "' has no outgoing edges");
    }
    return start;
}

}  // namespace

void RetrievalConfig::validate() const {
    if (hops < 1) throw ValidationError("hops must be at least 1");
    if (beam_width < 1) throw ValidationError("beam width must be at least 1");
    if (max_relations_per_hop < 1) throw ValidationError("max relations per hop must be at least 1");
}

void PathCandidate::extend(const Triple& link, const HopScore& score) {
    links.push_back(link);
    hops.push_back(score);
    cum_logp_cond += score.logp_cond;
    cum_logp_uncond += score.logp_uncond;
}

bool ranks_before(const PathCandidate& a, const PathCandidate& b) {
    const double ra = a.cum_log_ratio();
    const double rb = b.cum_log_ratio();
    if (ra != rb) return ra > rb;
    return std::lexicographical_compare(
        a.links.begin(), a.links.end(), b.links.begin(), b.links.end(), [](const Triple& x, const Triple& y) {
            if (x.relation() != y.relation()) return x.relation() < y.relation();
            return x.tail() < y.tail();
        });
}

std::string scoring_context(std::string_view question, std::span<const Triple> prefix, std::string_view head) {
    std::string ctx = collapse_whitespace(question);
    for (const Triple& t : prefix) ctx = extend_context(ctx, verbalize_fact(t));
    return extend_context(ctx, head);
}

HopScore relation_log_ratio(const Scorer& scorer, std::string_view question, std::span<const Triple> prefix,
                            std::string_view head, std::string_view relation) {
    HopScore s;
    s.logp_cond = scorer.sequence_logprob(scoring_context(question, prefix, head), relation);
    s.logp_uncond = scorer.sequence_logprob(scoring_context("", prefix, head), relation);
    if (!std::isfinite(s.logp_cond) || !std::isfinite(s.logp_uncond)) {
        throw BackendError("non-finite relation log-probability for '" + std::string(relation) + "'");
    }
    return s;
}

double mi_score(double log_ratio) {
    if (log_ratio == -INFINITY) return 0.0;
    const double rho = std::exp2(log_ratio);
    if (rho == 0.0) return 0.0;
    return rho * log_ratio;
}

ScoredSubgraph beam_search_retrieve(const EditedKG& kg, const Scorer& scorer, std::string_view question,
                                    std::string_view start_entity, const RetrievalConfig& config) {
    config.validate();
    const std::string start = checked_start(kg, question, start_entity);

    std::vector<PathCandidate> live(1);
    std::vector<PathCandidate> finished;

    struct Job {
        std::size_t candidate;
        std::string relation;
        std::vector<std::string> tails;
        HopScore score;
    };

    for (int hop = 0; hop < config.hops && !live.empty(); ++hop) {
        std::vector<Job> jobs;
        std::vector<bool> expanded(live.size(), false);
        for (std::size_t ci = 0; ci < live.size(); ++ci) {
            const std::string& entity = frontier(live[ci], start);
            const auto all = kg.outgoing(entity);
            if (distinct_relations(all) > static_cast<std::size_t>(config.max_relations_per_hop)) {
                throw RetrievalError("entity '" + entity + "' has " + std::to_string(distinct_relations(all)) +
                                     " relations, above the per-hop cap of " +
                                     std::to_string(config.max_relations_per_hop));
            }
            const auto edges = available_edges(kg, entity, live[ci].links);
            if (edges.empty()) {
                live[ci].dead_end = true;
                finished.push_back(live[ci]);
                continue;
            }
            expanded[ci] = true;
            for (auto& [rel, tails] : group_by_relation(edges)) jobs.push_back({ci, rel, std::move(tails), {}});
        }

        parallel_for(jobs.size(), config.parallelism, [&](std::size_t j) {
            Job& job = jobs[j];
            const PathCandidate& c = live[job.candidate];
            job.score = relation_log_ratio(scorer, question, c.links, frontier(c, start), job.relation);
        });

        std::vector<PathCandidate> next;
        for (const Job& job : jobs) {
            const PathCandidate& parent = live[job.candidate];
            const std::string& entity = frontier(parent, start);
            for (const std::string& tail : job.tails) {
                PathCandidate child = parent;
                child.extend(Triple(entity, job.relation, tail), job.score);
                next.push_back(std::move(child));
            }
        }
        std::sort(next.begin(), next.end(), ranks_before);
        if (next.size() > static_cast<std::size_t>(config.beam_width)) next.resize(config.beam_width);
        live = std::move(next);
    }
    finished.insert(finished.end(), live.begin(), live.end());

    const auto best = std::min_element(finished.begin(), finished.end(), ranks_before);
    return finish(kg, scorer, question, start, *best, config.include_question_prior);
}

namespace {

std::size_t count_maximal_paths(const EditedKG& kg, const std::string& entity, std::vector<Triple>& links, int remaining,
                                std::size_t bound, std::size_t counted) {
    if (remaining == 0) return counted + 1;
    const auto edges = available_edges(kg, entity, links);
    if (edges.empty()) return counted + 1;
    for (const OutEdge& e : edges) {
        links.emplace_back(entity, e.relation, e.tail);
        counted = count_maximal_paths(kg, e.tail, links, remaining - 1, bound, counted);
        links.pop_back();
        if (counted > bound) return counted;
    }
    return counted;
}

struct Exhaustive {
    const EditedKG& kg;
    const Scorer& scorer;
    std::string_view question;
    std::optional<PathCandidate> best;

    void visit(PathCandidate& path, const std::string& entity, int remaining) {
        const auto edges = remaining > 0 ? available_edges(kg, entity, path.links) : std::vector<OutEdge>{};
        if (edges.empty()) {
            PathCandidate leaf = path;
            leaf.dead_end = remaining > 0;
            if (!best || ranks_before(leaf, *best)) best = std::move(leaf);
            return;
        }
        for (const auto& [rel, tails] : group_by_relation(edges)) {
            const HopScore score = relation_log_ratio(scorer, question, path.links, entity, rel);
            for (const std::string& tail : tails) {
                PathCandidate child = path;
                child.extend(Triple(entity, rel, tail), score);
                visit(child, tail, remaining - 1);
            }
        }
    }
};

}  // namespace

ScoredSubgraph exhaustive_retrieve(const EditedKG& kg, const Scorer& scorer, std::string_view question,
                                   std::string_view start_entity, int hops, std::size_t path_bound,
                                   bool include_question_prior) {
    if (hops < 1) throw ValidationError("hops must be at least 1");
    const std::string start = checked_start(kg, question, start_entity);

    std::vector<Triple> scratch;
    const std::size_t paths = count_maximal_paths(kg, start, scratch, hops, path_bound, 0);
    if (paths > path_bound) {
        throw OracleError("exhaustive retrieval from '" + start + "' exceeds the bound of " +
                          std::to_string(path_bound) + " paths");
    }

    Exhaustive search{kg, scorer, question, std::nullopt};
    PathCandidate root;
    search.visit(root, start, hops);
    return finish(kg, scorer, question, start, *search.best, include_question_prior);
}

json scored_subgraph_to_json(const ScoredSubgraph& s) {
    json chain = json::array();
    for (const Triple& t : s.chain.links()) {
        json j = triple_to_json(t);
        j["edited"] = std::find(s.edited_members.begin(), s.edited_members.end(), t) != s.edited_members.end();
        chain.push_back(std::move(j));
    }
    json cond = json::array();
    json uncond = json::array();
    for (const HopScore& h : s.per_hop) {
        cond.push_back(h.logp_cond);
        uncond.push_back(h.logp_uncond);
    }
    json out{{"question", s.question},
             {"chain", std::move(chain)},
             {"log_ratio", s.log_ratio},
             {"mi_score", s.mi_score},
             {"per_hop", {{"cond", std::move(cond)}, {"uncond", std::move(uncond)}}},
             {"dead_end", s.dead_end}};
    if (s.question_prior) out["question_prior"] = *s.question_prior;
    return out;
}

}  // namespace rae
