#pragma once

#include "rae/evalharness.hpp"
#include "rae/kgstore.hpp"
#include "rae/prompt.hpp"
#include "rae/text.hpp"
#include "rae/retriever.hpp"
#include "rae/scorer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace rae::testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("rae_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

class CountingScorer final : public Scorer {
public:
    explicit CountingScorer(std::shared_ptr<const Scorer> inner) : inner_(std::move(inner)) {}

    double sequence_logprob(std::string_view context, std::string_view continuation) const override {
        ++sequence_calls;
        return inner_->sequence_logprob(context, continuation);
    }
    TokenDist next_token_dist(std::string_view context) const override {
        ++dist_calls;
        return inner_->next_token_dist(context);
    }
    std::string describe() const override { return inner_->describe(); }

    mutable std::atomic<int> sequence_calls{0};
    mutable std::atomic<int> dist_calls{0};

private:
    std::shared_ptr<const Scorer> inner_;
};

// Writes p(relation | context) = prob for a possibly multi-token relation: the
// first token carries `prob`, the rest are certain.
inline void set_relation_prob(MockTable& table, const std::string& context, const std::string& relation,
                              double prob) {
    std::istringstream words(relation);
    std::string tok;
    std::string ctx = context;
    bool first = true;
    while (words >> tok) {
        table.set_prob(ctx, tok, first ? prob : 1.0);
        ctx = extend_context(ctx, tok);
        first = false;
    }
}

// Sets cond/uncond probabilities so the hop's log ratio is exactly `log_ratio`
// (a multiple of 0.5 inside [-4, 4] keeps both probabilities exact and in (0, 1]).
inline void plant_ratio(MockTable& table, const std::string& question, std::span<const Triple> prefix,
                        const std::string& head, const std::string& relation, double log_ratio) {
    const double uncond = std::exp2(-4.5);
    const double cond = std::exp2(-4.5 + log_ratio);
    set_relation_prob(table, scoring_context(question, prefix, head), relation, cond);
    set_relation_prob(table, scoring_context("", prefix, head), relation, uncond);
}

// Random KG with a planted gold chain whose every hop ratio is positive and
// strictly above every other (prefix, relation) ratio the search can meet.
// The gold chain is then the unique exhaustive argmax and the beam's top
// candidate at every hop.
struct PlantedInstance {
    EditedKG kg;
    std::shared_ptr<const MockScorer> scorer;
    std::string question;
    std::string start;
    FactChain gold;
    int max_out_degree = 0;
};

inline PlantedInstance make_planted_instance(std::mt19937_64& rng, bool global_dominance = true) {
    std::uniform_int_distribution<int> entity_count(8, 25);
    std::uniform_int_distribution<int> gold_len(2, 4);
    std::uniform_int_distribution<int> out_degree(0, 4);
    const std::vector<std::string> relations = {"author", "citizen of", "capital", "spouse", "located in",
                                                "member of", "founded by", "child"};

    const int n_entities = entity_count(rng);
    std::vector<std::string> entities;
    for (int i = 0; i < n_entities; ++i) entities.push_back("E" + std::to_string(i));

    // Gold chain over distinct entities.
    std::vector<int> order(n_entities);
    for (int i = 0; i < n_entities; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const int len = gold_len(rng);
    std::vector<Triple> gold;
    std::uniform_int_distribution<std::size_t> pick_rel(0, relations.size() - 1);
    for (int i = 0; i < len; ++i) {
        gold.emplace_back(entities[order[i]], relations[pick_rel(rng)], entities[order[i + 1]]);
    }

    KgBuilder builder;
    std::vector<std::vector<std::pair<std::string, std::string>>> out(n_entities);
    auto degree = [&](int e) { return static_cast<int>(out[e].size()); };
    auto add = [&](int h, const std::string& r, int t) {
        // A second tail on a gold (head, relation) would share the gold score.
        for (int i = 0; i < len; ++i) {
            if (order[i] == h && gold[i].relation() == r && order[i + 1] != t) return;
        }
        for (const auto& [rr, tt] : out[h]) {
            if (rr == r && tt == entities[t]) return;
        }
        out[h].emplace_back(r, entities[t]);
        builder.add_triple(Triple(entities[h], r, entities[t]));
    };
    for (int i = 0; i < len; ++i) add(order[i], gold[i].relation(), order[i + 1]);
    std::uniform_int_distribution<int> pick_entity(0, n_entities - 1);
    for (int e = 0; e < n_entities; ++e) {
        const int target = out_degree(rng);
        for (int tries = 0; degree(e) < target && tries < 20; ++tries) {
            add(e, relations[pick_rel(rng)], pick_entity(rng));
        }
    }

    PlantedInstance inst{builder.freeze(), nullptr, "planted question " + std::to_string(rng() % 100000) + "?",
                         entities[order[0]], FactChain::validate(gold), 0};
    for (const auto& edges : out) inst.max_out_degree = std::max(inst.max_out_degree, static_cast<int>(edges.size()));

    // Ratios in half-bit steps. Gold hops get [1.5, 3]; everything else the
    // search can score gets [-3, 1] under global dominance, or [-3, 3] but
    // below its gold sibling otherwise.
    MockTable table;
    std::uniform_int_distribution<int> gold_step(3, 6);
    std::uniform_int_distribution<int> low_step(-6, 2);
    std::uniform_int_distribution<int> any_step(-6, 6);
    auto noise = [&](double cap) {
        if (global_dominance) return low_step(rng) * 0.5;
        double v;
        do v = any_step(rng) * 0.5;
        while (v >= cap);
        return v;
    };
    // Every reachable (prefix, head) context along any path up to the gold
    // length gets ratios for its outgoing relations.
    std::vector<Triple> prefix;
    std::function<void(const std::string&, int)> visit = [&](const std::string& head, int depth) {
        if (depth == len) return;
        const int h = std::stoi(head.substr(1));
        std::set<std::string> seen;
        const bool on_gold = prefix.size() == static_cast<std::size_t>(depth) &&
                             std::equal(prefix.begin(), prefix.end(), gold.begin());
        double gold_ratio = 4.0;
        if (on_gold) {
            gold_ratio = gold_step(rng) * 0.5;
            plant_ratio(table, inst.question, prefix, head, gold[depth].relation(), gold_ratio);
            seen.insert(gold[depth].relation());
        }
        for (const auto& [r, t] : out[h]) {
            if (seen.insert(r).second) plant_ratio(table, inst.question, prefix, head, r, noise(gold_ratio));
        }
        for (const auto& [r, t] : out[h]) {
            const Triple link(head, r, t);
            if (std::find(prefix.begin(), prefix.end(), link) != prefix.end()) continue;
            prefix.push_back(link);
            visit(t, depth + 1);
            prefix.pop_back();
        }
    };
    visit(inst.start, 0);
    inst.scorer = make_mock_scorer(std::move(table), {"x"});
    return inst;
}

inline bool chain_subset_of(const FactChain& retrieved, const FactChain& gold) {
    for (const Triple& t : retrieved.links()) {
        if (std::find(gold.links().begin(), gold.links().end(), t) == gold.links().end()) return false;
    }
    return true;
}

// Three-case end-to-end fixture. Each gold chain is followed by two junk hops
// from the answer entity, so retrieval with n = K + 2 always returns the gold
// chain plus two junk facts; only the gold-length prompt has a sharp
// next-token row and a mock completion naming the answer.
struct EvalFixture {
    std::string triples;
    std::string dataset;
    std::string scorer;
    std::string generator;
    std::vector<Case> cases;
};

inline EvalFixture write_eval_fixture(const TempDir& dir) {
    struct Spec {
        std::string id, question, entity;
        std::vector<Triple> pre, edited, junk, distractors;
        std::vector<Edit> edits;
        std::string original, answer;
    };
    const std::vector<Spec> specs = {
        {"spouse-2hop",
         "Who is married to the author of Silver Lake?",
         "Silver Lake",
         {Triple("Silver Lake", "author", "Ann Reyes"), Triple("Ann Reyes", "spouse", "Paul Reyes")},
         {Triple("Silver Lake", "author", "Tom Hale"), Triple("Tom Hale", "spouse", "Jane Hale")},
         {Triple("Jane Hale", "born in", "Leeds"), Triple("Leeds", "country", "England")},
         {Triple("Tom Hale", "educated at", "Oxford")},
         {Edit("Silver Lake", "author", std::string_view("Ann Reyes"), "Tom Hale")},
         "Paul Reyes",
         "Jane Hale"},
        {"capital-3hop",
         "Which city is the capital of the country where the author of Harry Potter held citizenship?",
         "Harry Potter",
         {Triple("Harry Potter", "author", "J. K. Rowling"), Triple("J. K. Rowling", "citizen of", "United Kingdom"),
          Triple("United Kingdom", "capital", "London")},
         {Triple("Harry Potter", "author", "Stephen King"), Triple("Stephen King", "citizen of", "United States"),
          Triple("United States", "capital", "Boston")},
         {Triple("Boston", "twinned with", "Hangzhou"), Triple("Hangzhou", "province", "Zhejiang")},
         {Triple("Stephen King", "genre", "horror"), Triple("United States", "currency", "dollar")},
         {Edit("Harry Potter", "author", std::string_view("J. K. Rowling"), "Stephen King"),
          Edit("United States", "capital", std::nullopt, "Boston")},
         "London",
         "Boston"},
        {"ceo-2hop",
         "Who is the chief executive of the maker of the Model Q?",
         "Model Q",
         {Triple("Model Q", "manufacturer", "Volta Motors"), Triple("Volta Motors", "chief executive", "Ida Lund")},
         {Triple("Model Q", "manufacturer", "Volta Motors"), Triple("Volta Motors", "chief executive", "Rui Costa")},
         {Triple("Rui Costa", "born in", "Porto"), Triple("Porto", "country", "Portugal")},
         {Triple("Model Q", "color", "red")},
         {Edit("Volta Motors", "chief executive", std::nullopt, "Rui Costa")},
         "Ida Lund",
         "Rui Costa"},
    };

    EvalFixture fx{dir.file("triples.jsonl"), dir.file("dataset.jsonl"), dir.file("scorer.jsonl"),
                   dir.file("generator.jsonl"), {}};
    MockTable table;
    table.vocabulary = {"Jane", "Boston", "Rui", "London", "Paul", "Ida", "unknown"};
    json triples = json::array();
    std::ofstream tf(fx.triples), df(fx.dataset), gf(fx.generator);
    gf << json{{"fallback", "unknown"}}.dump() << '\n';
    const PromptTemplate& tmpl = PromptTemplate::standard();
    for (const Spec& s : specs) {
        for (const auto* group : {&s.pre, &s.junk, &s.distractors}) {
            for (const Triple& t : *group) tf << triple_to_json(t).dump() << '\n';
        }
        // Edited triples that no edit introduces are base facts.
        for (const Triple& t : s.edited) {
            bool from_edit = false;
            for (const Edit& e : s.edits) from_edit |= e.edited_triple() == t;
            if (!from_edit && std::find(s.pre.begin(), s.pre.end(), t) == s.pre.end()) {
                tf << triple_to_json(t).dump() << '\n';
            }
        }
        std::vector<Triple> path = s.edited;
        path.insert(path.end(), s.junk.begin(), s.junk.end());
        for (std::size_t i = 0; i < s.edited.size(); ++i) {
            const std::span<const Triple> prefix(path.data(), i);
            plant_ratio(table, s.question, prefix, path[i].head(), path[i].relation(), 2.0);
            for (const Triple& d : s.distractors) {
                if (d.head() == path[i].head()) plant_ratio(table, s.question, prefix, d.head(), d.relation(), -1.0);
            }
        }
        const std::string answer_token = split_whitespace(s.answer).front();
        TokenDist sharp;
        for (const auto& tok : table.vocabulary) sharp.entries[tok] = tok == answer_token ? 0.94 : 0.01;
        table.set_row(build_edit_prompt(tmpl, s.question, std::span<const Triple>(s.edited)), sharp);
        gf << json{{"prompt", build_edit_prompt(tmpl, s.question, std::span<const Triple>(s.edited))},
                   {"completion", s.answer + " is the answer"}}
                  .dump()
           << '\n';

        Case c{s.id,
               s.question,
               s.entity,
               static_cast<int>(s.edited.size()),
               FactChain::validate(s.pre),
               FactChain::validate(s.edited),
               s.edits,
               s.original,
               s.answer,
               {}};
        df << case_to_json(c).dump() << '\n';
        fx.cases.push_back(std::move(c));
    }
    save_mock_table(table, fx.scorer);
    return fx;
}

}  // namespace rae::testing
