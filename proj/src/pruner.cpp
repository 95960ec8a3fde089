#include "rae/pruner.hpp"

#include "rae/error.hpp"
#include "rae/infotheory.hpp"
#include "rae/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rae {

PrefixSet prefix_sets(const FactChain& chain) {
    PrefixSet set;
    set.prefixes.reserve(chain.hop_count());
    for (std::size_t len = 1; len <= chain.hop_count(); ++len) set.prefixes.push_back(chain.prefix(len));
    return set;
}

double normalized_entropy(const TokenDist& dist) {
    const std::vector<double> p = dist.outcomes();
    if (p.size() <= 1) return 0.0;
    // Equiprobable outcomes: H equals log2(count) exactly.
    if (std::all_of(p.begin(), p.end(), [&](double x) { return x == p.front(); })) return 1.0;
    const double h = info::shannon_entropy(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
    return std::clamp(h / std::log2(static_cast<double>(p.size())), 0.0, 1.0);
}

double editing_entropy(const Scorer& scorer, std::string_view question, const FactChain& facts,
                       const PromptTemplate& tmpl) {
    const TokenDist dist = scorer.next_token_dist(build_edit_prompt(tmpl, question, facts));
    dist.validate();
    return normalized_entropy(dist);
}

PruneReport prune(const Scorer& scorer, std::string_view question, const FactChain& chain,
                  const PromptTemplate& tmpl, std::size_t parallelism) {
    const PrefixSet set = prefix_sets(chain);
    std::vector<double> values(set.prefixes.size());
    parallel_for(values.size(), parallelism,
                 [&](std::size_t i) { values[i] = editing_entropy(scorer, question, set.prefixes[i], tmpl); });

    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[best]) best = i;
    }
    PruneReport report{{}, best + 1, set.prefixes[best]};
    for (std::size_t i = 0; i < values.size(); ++i) report.entropies.emplace_back(i + 1, values[i]);
    return report;
}

json prune_report_to_json(const PruneReport& report) {
    json entropies = json::array();
    for (const auto& [len, h] : report.entropies) entropies.push_back(json::array({len, h}));
    return json{{"entropies", std::move(entropies)},
                {"selected_length", report.selected_length},
                {"selected_chain", chain_to_json(report.selected_chain)}};
}

}  // namespace rae
