#include "rae/pruner.hpp"

#include "rae/error.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rae;

namespace {

const std::string kQ = "Which city is the capital?";

FactChain chain3() {
    return FactChain::validate({Triple("A", "r", "B"), Triple("B", "s", "C"), Triple("C", "t", "D")});
}

std::string prompt_for(const FactChain& c, std::size_t len) {
    return build_edit_prompt(PromptTemplate::standard(), kQ, c.prefix(len));
}

}  // namespace

TEST(PrefixSets, ThreeLinks) {
    const PrefixSet s = prefix_sets(chain3());
    ASSERT_EQ(s.prefixes.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(s.prefixes[i].hop_count(), i + 1);
        for (std::size_t k = 0; k <= i; ++k) EXPECT_EQ(s.prefixes[i][k], chain3()[k]);
    }
}

TEST(PrefixSets, SingleLink) {
    EXPECT_EQ(prefix_sets(FactChain::validate({Triple("A", "r", "B")})).prefixes.size(), 1u);
}

TEST(NormalizedEntropy, Values) {
    EXPECT_EQ(normalized_entropy(TokenDist::uniform({"a", "b", "c"})), 1.0);
    EXPECT_EQ(normalized_entropy(TokenDist{{{"Boston", 1.0}}, 0.0}), 0.0);
    EXPECT_EQ(normalized_entropy(TokenDist{{{"Boston", 1.0}, {"London", 0.0}}, 0.0}), 0.0);
    // H = 1.5 bits over log2(3).
    EXPECT_NEAR(normalized_entropy(TokenDist{{{"a", 0.5}, {"b", 0.25}, {"c", 0.25}}, 0.0}), 1.5 / std::log2(3.0), 1e-12);
    EXPECT_NEAR(normalized_entropy(TokenDist{{{"a", 0.5}, {"b", 0.25}, {"c", 0.25}}, 0.0}), 0.946, 1e-3);
}

TEST(NormalizedEntropy, TailMassIsOneOutcome) {
    // {0.5, 0.25} + tail 0.25 is the same three-outcome distribution.
    EXPECT_NEAR(normalized_entropy(TokenDist{{{"a", 0.5}, {"b", 0.25}}, 0.25}), 1.5 / std::log2(3.0), 1e-12);
    EXPECT_EQ(normalized_entropy(TokenDist{{{"a", 0.5}}, 0.5}), 1.0);
}

TEST(NormalizedEntropy, InUnitIntervalAndPermutationInvariant) {
    std::mt19937_64 rng(17);
    std::exponential_distribution<double> e(1.0);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> w(2 + i % 7);
        double t = 0;
        for (double& x : w) t += (x = e(rng));
        TokenDist a, b;
        for (std::size_t k = 0; k < w.size(); ++k) {
            a.entries["t" + std::to_string(k)] = w[k] / t;
            b.entries["t" + std::to_string(w.size() - 1 - k)] = w[k] / t;
        }
        const double h = normalized_entropy(a);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, 1.0);
        EXPECT_NEAR(h, normalized_entropy(b), 1e-12);
    }
}

TEST(EditingEntropy, UsesEditingPrompt) {
    const FactChain c = chain3();
    MockTable table;
    table.set_row(prompt_for(c, 2), TokenDist{{{"x", 1.0}, {"y", 0.0}}, 0.0});
    const auto s = make_mock_scorer(table, {"x", "y"});
    EXPECT_EQ(editing_entropy(*s, kQ, c.prefix(2)), 0.0);
    EXPECT_EQ(editing_entropy(*s, kQ, c.prefix(1)), 1.0);
}

TEST(Prune, SelectsSharpPrefix) {
    const FactChain c = chain3();
    MockTable table;
    table.set_row(prompt_for(c, 1), TokenDist{{{"x", 0.5}, {"y", 0.3}, {"z", 0.2}}, 0.0});
    table.set_row(prompt_for(c, 2), TokenDist{{{"x", 0.98}, {"y", 0.01}, {"z", 0.01}}, 0.0});
    table.set_row(prompt_for(c, 3), TokenDist{{{"x", 0.6}, {"y", 0.2}, {"z", 0.2}}, 0.0});
    rae::testing::CountingScorer counter(make_mock_scorer(table));
    const PruneReport r = prune(counter, kQ, c);
    EXPECT_EQ(r.selected_length, 2u);
    EXPECT_EQ(r.selected_chain, c.prefix(2));
    EXPECT_EQ(counter.dist_calls, 3);
    ASSERT_EQ(r.entropies.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.entropies[i].first, i + 1);
}

TEST(Prune, UniformRowsTieToShortest) {
    const PruneReport r = prune(*make_mock_scorer(MockTable{}, {"a", "b"}), kQ, chain3());
    EXPECT_EQ(r.selected_length, 1u);
    for (const auto& [len, h] : r.entropies) EXPECT_EQ(h, 1.0);
}

TEST(Prune, SingleLink) {
    const FactChain c = FactChain::validate({Triple("A", "r", "B")});
    const PruneReport r = prune(*make_mock_scorer(MockTable{}, {"a"}), kQ, c);
    EXPECT_EQ(r.selected_chain, c);
    EXPECT_EQ(r.entropies.size(), 1u);
}

TEST(Prune, TieAmongLaterPrefixesPicksShortestOfThem) {
    const FactChain c = chain3();
    MockTable table;
    table.set_row(prompt_for(c, 2), TokenDist{{{"x", 1.0}}, 0.0});
    table.set_row(prompt_for(c, 3), TokenDist{{{"y", 1.0}}, 0.0});
    EXPECT_EQ(prune(*make_mock_scorer(table, {"x", "y"}), kQ, c).selected_length, 2u);
}

TEST(Prune, ParallelMatchesSerial) {
    const FactChain c = chain3();
    MockTable table;
    table.set_row(prompt_for(c, 3), TokenDist{{{"x", 0.9}, {"y", 0.1}}, 0.0});
    const auto s = make_mock_scorer(table);
    const PruneReport a = prune(*s, kQ, c);
    const PruneReport b = prune(*s, kQ, c, PromptTemplate::standard(), 3);
    EXPECT_EQ(a.entropies, b.entropies);
    EXPECT_EQ(a.selected_length, 3u);
    EXPECT_EQ(b.selected_length, 3u);
}

TEST(Prune, SelectedChainIsAlwaysAPrefix) {
    std::mt19937_64 rng(23);
    std::exponential_distribution<double> e(1.0);
    for (int i = 0; i < 50; ++i) {
        const FactChain c = chain3();
        MockTable table;
        for (std::size_t len = 1; len <= 3; ++len) {
            if (rng() % 2) continue;
            const double a = e(rng), b = e(rng);
            table.set_row(prompt_for(c, len), TokenDist{{{"x", a / (a + b)}, {"y", b / (a + b)}}, 0.0});
        }
        const PruneReport r = prune(*make_mock_scorer(table, {"x", "y"}), kQ, c);
        EXPECT_EQ(r.selected_chain, c.prefix(r.selected_length));
        double best = 2.0;
        for (const auto& [len, h] : r.entropies) best = std::min(best, h);
        EXPECT_EQ(r.entropies[r.selected_length - 1].second, best);
        for (std::size_t k = 0; k + 1 < r.selected_length; ++k) EXPECT_GT(r.entropies[k].second, best);
    }
}

TEST(PruneReportJson, Shape) {
    const json j = prune_report_to_json(prune(*make_mock_scorer(MockTable{}, {"a", "b"}), kQ, chain3()));
    EXPECT_EQ(j["entropies"].size(), 3u);
    EXPECT_EQ(j["entropies"][0][0], 1);
    EXPECT_EQ(j["selected_length"], 1);
    EXPECT_EQ(j["selected_chain"].size(), 1u);
}
