#pragma once

#include "rae/kgstore.hpp"

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rae {

// Probability floor for continuations a mock table does not mention.
inline const double kDefaultEpsilon = std::exp2(-20.0);

// Next-token distribution. `tail_mass` is the probability of every token not
// listed in `entries`, lumped into one pseudo-outcome.
struct TokenDist {
    std::map<std::string, double> entries;
    double tail_mass = 0.0;

    // Throws ValidationError unless probabilities lie in [0, 1] and sum to
    // 1 within 1e-6.
    void validate() const;

    // Entry probabilities in key order, followed by tail_mass when positive.
    std::vector<double> outcomes() const;

    static TokenDist uniform(const std::vector<std::string>& tokens);

    bool operator==(const TokenDist&) const = default;
};

// Conditional-probability backend. All log-probabilities are base 2.
// Implementations are safe for concurrent calls.
class Scorer {
public:
    virtual ~Scorer() = default;

    // Sum over continuation tokens of log2 p(token | context, earlier tokens).
    virtual double sequence_logprob(std::string_view context, std::string_view continuation) const = 0;
    virtual TokenDist next_token_dist(std::string_view context) const = 0;
    virtual std::string describe() const = 0;
};

// "(head, relation, tail)", labels verbatim.
std::string verbalize_fact(const Triple& t);

// Context after appending one more whitespace-delimited token.
std::string extend_context(std::string_view context, std::string_view token);

// Lookup tables for the mock backend. Contexts are stored whitespace-collapsed
// and continuation keys are single tokens.
class MockTable {
public:
    // Throws ValidationError unless 0 < prob <= 1 and continuation is one token.
    void set_prob(std::string_view context, std::string_view token, double prob);
    // Throws ValidationError unless the row is a valid TokenDist with no tail mass.
    void set_row(std::string_view context, TokenDist row);

    const std::map<std::pair<std::string, std::string>, double>& probs() const { return probs_; }
    const std::map<std::string, TokenDist>& rows() const { return rows_; }

    // Every token appearing as a continuation key or a row entry.
    std::vector<std::string> tokens() const;

    std::vector<std::string> vocabulary;  // optional explicit vocabulary

private:
    std::map<std::pair<std::string, std::string>, double> probs_;
    std::map<std::string, TokenDist> rows_;
};

// Mock table file: one record per line, either
//   {"context": ..., "continuation": ..., "prob": p}
//   {"context": ..., "dist": {token: p, ...}}
// or a {"vocabulary": [...]} record.
MockTable load_mock_table(const std::filesystem::path& path);
void save_mock_table(const MockTable& table, const std::filesystem::path& path);

// Whitespace-tokenized, table-driven scorer. Unseen continuation tokens score
// `epsilon`; contexts with no row get the uniform distribution over the
// vocabulary.
class MockScorer final : public Scorer {
public:
    MockScorer(MockTable table, std::vector<std::string> vocabulary, double epsilon);

    double sequence_logprob(std::string_view context, std::string_view continuation) const override;
    TokenDist next_token_dist(std::string_view context) const override;
    std::string describe() const override { return "mock"; }

    double token_prob(std::string_view context, std::string_view token) const;
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    double epsilon() const { return epsilon_; }

private:
    MockTable table_;
    std::vector<std::string> vocabulary_;
    double epsilon_;
};

// Empty `vocabulary` falls back to the table's vocabulary, then to its tokens.
std::shared_ptr<const MockScorer> make_mock_scorer(MockTable table, std::vector<std::string> vocabulary = {},
                                                   double epsilon = kDefaultEpsilon);

}  // namespace rae
