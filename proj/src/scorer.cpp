#include "rae/scorer.hpp"

#include "rae/error.hpp"
#include "rae/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace rae {

namespace {

constexpr double kSumTolerance = 1e-6;

bool valid_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void TokenDist::validate() const {
    double total = tail_mass;
    if (!valid_probability(tail_mass)) throw ValidationError("tail_mass outside [0, 1]");
    for (const auto& [token, p] : entries) {
        if (!valid_probability(p)) {
            throw ValidationError("probability of '" + token + "' outside [0, 1]");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
        throw ValidationError("distribution sums to " + std::to_string(total));
    }
}

std::vector<double> TokenDist::outcomes() const {
    std::vector<double> out;
    out.reserve(entries.size() + 1);
    for (const auto& [token, p] : entries) out.push_back(p);
    if (tail_mass > 0.0) out.push_back(tail_mass);
    return out;
}

TokenDist TokenDist::uniform(const std::vector<std::string>& tokens) {
    TokenDist dist;
    std::set<std::string> unique(tokens.begin(), tokens.end());
    const double p = 1.0 / static_cast<double>(unique.size());
    for (const auto& t : unique) dist.entries.emplace(t, p);
    return dist;
}

std::string verbalize_fact(const Triple& t) {
    return "(" + t.head() + ", " + t.relation() + ", " + t.tail() + ")";
}

std::string extend_context(std::string_view context, std::string_view token) {
    if (context.empty()) return std::string(token);
    std::string out(context);
    out.push_back(' ');
    out.append(token);
    return out;
}

void MockTable::set_prob(std::string_view context, std::string_view token, double prob) {
    if (!std::isfinite(prob) || prob <= 0.0 || prob > 1.0) {
        throw ValidationError("mock continuation probability must lie in (0, 1], got " +
                              std::to_string(prob));
    }
    auto tokens = split_whitespace(token);
    if (tokens.size() != 1) {
        throw ValidationError("mock continuation entries must be a single token: '" +
                              std::string(token) + "'");
    }
    probs_.insert_or_assign({collapse_whitespace(context), tokens.front()}, prob);
}

void MockTable::set_row(std::string_view context, TokenDist row) {
    if (row.tail_mass != 0.0) throw ValidationError("mock rows carry no tail mass");
    if (row.entries.empty()) throw ValidationError("mock row is empty");
    row.validate();
    rows_.insert_or_assign(collapse_whitespace(context), std::move(row));
}

std::vector<std::string> MockTable::tokens() const {
    std::set<std::string> all;
    for (const auto& [key, p] : probs_) all.insert(key.second);
    for (const auto& [ctx, row] : rows_) {
        for (const auto& [token, p] : row.entries) all.insert(token);
    }
    return {all.begin(), all.end()};
}

MockTable load_mock_table(const std::filesystem::path& path) {
    MockTable table;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        try {
            if (auto v = r.find("vocabulary"); v != r.end()) {
                for (const auto& tok : *v) table.vocabulary.push_back(tok.get<std::string>());
                return;
            }
            std::string context = required_string(r, "context", line);
            if (auto d = r.find("dist"); d != r.end()) {
                if (!d->is_object()) throw ParseError("'dist' must be an object");
                TokenDist row;
                for (const auto& [token, p] : d->items()) row.entries.emplace(token, p.get<double>());
                table.set_row(context, std::move(row));
            } else {
                auto p = r.find("prob");
                if (p == r.end() || !p->is_number()) throw ParseError("missing numeric 'prob'");
                table.set_prob(context, required_string(r, "continuation", line), p->get<double>());
            }
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(line) + ": " + e.what());
        } catch (const InputError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
    });
    return table;
}

void save_mock_table(const MockTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    if (!table.vocabulary.empty()) out << json{{"vocabulary", table.vocabulary}}.dump() << '\n';
    for (const auto& [key, p] : table.probs()) {
        out << json{{"context", key.first}, {"continuation", key.second}, {"prob", p}}.dump() << '\n';
    }
    for (const auto& [ctx, row] : table.rows()) {
        out << json{{"context", ctx}, {"dist", row.entries}}.dump() << '\n';
    }
}

MockScorer::MockScorer(MockTable table, std::vector<std::string> vocabulary, double epsilon)
    : table_(std::move(table)), vocabulary_(std::move(vocabulary)), epsilon_(epsilon) {
    if (!std::isfinite(epsilon_) || epsilon_ <= 0.0 || epsilon_ >= 1.0) {
        throw ValidationError("mock epsilon must lie in (0, 1)");
    }
    if (vocabulary_.empty()) vocabulary_ = table_.vocabulary;
    if (vocabulary_.empty()) vocabulary_ = table_.tokens();
    std::sort(vocabulary_.begin(), vocabulary_.end());
    vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
    if (vocabulary_.empty()) throw ValidationError("mock vocabulary is empty");
}

double MockScorer::token_prob(std::string_view context, std::string_view token) const {
    const std::string ctx(context);
    const std::string tok(token);
    if (auto it = table_.probs().find({ctx, tok}); it != table_.probs().end()) return it->second;
    if (auto row = table_.rows().find(ctx); row != table_.rows().end()) {
        if (auto e = row->second.entries.find(tok); e != row->second.entries.end() && e->second > 0.0) {
            return e->second;
        }
    }
    return epsilon_;
}

double MockScorer::sequence_logprob(std::string_view context, std::string_view continuation) const {
    const auto tokens = split_whitespace(continuation);
    if (tokens.empty()) throw ValidationError("continuation is empty");
    std::string ctx = collapse_whitespace(context);
    double total = 0.0;
    for (const auto& tok : tokens) {
        total += std::log2(token_prob(ctx, tok));
        ctx = extend_context(ctx, tok);
    }
    return total;
}

TokenDist MockScorer::next_token_dist(std::string_view context) const {
    if (auto row = table_.rows().find(collapse_whitespace(context)); row != table_.rows().end()) {
        return row->second;
    }
    return TokenDist::uniform(vocabulary_);
}

std::shared_ptr<const MockScorer> make_mock_scorer(MockTable table, std::vector<std::string> vocabulary,
                                                   double epsilon) {
    return std::make_shared<const MockScorer>(std::move(table), std::move(vocabulary), epsilon);
}

}  // namespace rae
