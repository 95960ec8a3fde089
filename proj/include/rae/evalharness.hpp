#pragma once

#include "rae/editor.hpp"
#include "rae/jsonl.hpp"
#include "rae/kgstore.hpp"
#include "rae/prompt.hpp"
#include "rae/pruner.hpp"
#include "rae/retriever.hpp"
#include "rae/scorer.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rae {

// One multi-hop editing case.
struct Case {
    std::string case_id;
    std::string question;
    std::string question_entity;
    int hops = 0;
    FactChain gold_pre_edit_chain;
    FactChain gold_edited_chain;
    std::vector<Edit> edits;
    std::string original_answer;
    std::string edited_answer;
    std::vector<std::string> answer_aliases;
};

// Empty vector when every invariant holds, otherwise one message per violation.
std::vector<std::string> case_violations(const Case& c);

// Line-delimited Case records. Throws ParseError on malformed lines and
// ValidationError listing every offending case_id.
std::vector<Case> load_dataset(const std::filesystem::path& path);

struct EditBank {
    std::vector<Edit> edits;
};

// Union of case edits with exact duplicates collapsed. Throws ConflictError
// naming both cases when (head, relation) maps to two new tails.
EditBank build_edit_bank(const std::vector<Case>& cases);

struct RetrievalMatch {
    bool pm = false;  // some retrieved triple is in the gold chain
    bool em = false;  // every retrieved triple is in the gold chain
};

RetrievalMatch retrieval_metrics(const FactChain& retrieved, const FactChain& gold);

struct CaseRecord {
    std::string case_id;
    int hops = 0;
    bool failed = false;
    std::string error;
    std::optional<ScoredSubgraph> retrieved;
    std::optional<PruneReport> prune;
    std::optional<EditOutcome> outcome;
    bool matched = false;
    RetrievalMatch metrics;                    // on the chain handed to the editor
    std::optional<RetrievalMatch> pre_prune;   // on the raw retrieved chain
};

// Percentages over one group of records, rounded half-up to 0.1.
struct Aggregate {
    std::size_t cases = 0;
    std::size_t failed = 0;
    std::size_t counted = 0;  // denominator
    double edited_accuracy = 0.0;
    double pm = 0.0;
    double em = 0.0;
    std::optional<double> pm_pre_prune;
    std::optional<double> em_pre_prune;

    bool operator==(const Aggregate&) const = default;
};

struct Aggregates {
    Aggregate overall;
    std::map<int, Aggregate> by_hops;

    bool operator==(const Aggregates&) const = default;
};

// Exact count-based percentage: round(100 * num / den, 1 decimal), half up.
double percent(std::size_t num, std::size_t den);

// Throws ValidationError on empty input. With `exclude_failures`, failed
// records are left out of the denominators; otherwise they count as misses.
Aggregates metrics_aggregate(const std::vector<CaseRecord>& records, bool exclude_failures = false);

struct EvalOptions {
    RetrievalConfig retrieval;          // `hops` is ignored when hops_override is unset
    std::optional<int> hops_override;   // fixed n; default n = K + extra_hops
    int extra_hops = 2;
    bool prune = true;
    bool emit_pre_prune_metrics = true;
    bool exclude_failures = false;
    std::size_t parallelism = 1;
    std::string scorer_descriptor;
    std::string generator_descriptor;
};

struct EvalReport {
    std::vector<CaseRecord> records;
    Aggregates aggregates;
    json config;
};

// Full pipeline against a frozen KG. Per-case failures are recorded, not thrown.
EvalReport evaluate_cases(const EditedKG& kg, const std::vector<Case>& cases, const Scorer& scorer,
                          const GenerationBackend& backend, const PromptTemplate& tmpl, const EvalOptions& options);

// Loads base triples and the dataset, merges the edit bank into the KG, runs
// evaluate_cases and writes the report (when report_path is non-empty).
EvalReport run_eval(const std::filesystem::path& kg_path, const std::filesystem::path& dataset_path,
                    const Scorer& scorer, const GenerationBackend& backend, const PromptTemplate& tmpl,
                    const EvalOptions& options, const std::filesystem::path& report_path);

json case_to_json(const Case& c);
Case case_from_json(const json& record, std::size_t line = 0);
json eval_report_to_json(const EvalReport& report);
std::string serialize_report(const EvalReport& report);

}  // namespace rae
