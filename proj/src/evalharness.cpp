#include "rae/evalharness.hpp"

#include "rae/error.hpp"
#include "rae/parallel.hpp"
#include "rae/text.hpp"

#include <algorithm>
#include <iostream>
#include <unordered_set>

namespace rae {

namespace {

std::vector<std::string> string_list(const json& record, const char* key) {
    std::vector<std::string> out;
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return out;
    if (!it->is_array()) throw ParseError(std::string("'") + key + "' must be an array");
    for (const auto& v : *it) out.push_back(v.get<std::string>());
    return out;
}

json match_to_json(const RetrievalMatch& m) { return json{{"pm", m.pm}, {"em", m.em}}; }

json aggregate_to_json(const Aggregate& a) {
    json j{{"cases", a.cases},
           {"failed", a.failed},
           {"counted", a.counted},
           {"edited_accuracy", a.edited_accuracy},
           {"pm", a.pm},
           {"em", a.em}};
    if (a.pm_pre_prune) j["pm_pre_prune"] = *a.pm_pre_prune;
    if (a.em_pre_prune) j["em_pre_prune"] = *a.em_pre_prune;
    return j;
}

Aggregate aggregate_group(const std::vector<const CaseRecord*>& group, bool exclude_failures) {
    Aggregate a;
    std::size_t matched = 0, pm = 0, em = 0, pre_pm = 0, pre_em = 0;
    bool have_pre = false;
    for (const CaseRecord* r : group) {
        ++a.cases;
        have_pre = have_pre || r->pre_prune.has_value();
        if (r->failed) {
            ++a.failed;
            if (exclude_failures) continue;
        }
        ++a.counted;
        if (r->failed) continue;
        matched += r->matched;
        pm += r->metrics.pm;
        em += r->metrics.em;
        if (r->pre_prune) {
            pre_pm += r->pre_prune->pm;
            pre_em += r->pre_prune->em;
        }
    }
    a.edited_accuracy = percent(matched, a.counted);
    a.pm = percent(pm, a.counted);
    a.em = percent(em, a.counted);
    if (have_pre) {
        a.pm_pre_prune = percent(pre_pm, a.counted);
        a.em_pre_prune = percent(pre_em, a.counted);
    }
    return a;
}

CaseRecord evaluate_case(const EditedKG& kg, const Case& c, const Scorer& scorer, const GenerationBackend& backend,
                         const PromptTemplate& tmpl, const EvalOptions& options) {
    CaseRecord record;
    record.case_id = c.case_id;
    record.hops = c.hops;
    try {
        RetrievalConfig cfg = options.retrieval;
        cfg.hops = options.hops_override.value_or(c.hops + options.extra_hops);
        cfg.parallelism = 1;
        record.retrieved = beam_search_retrieve(kg, scorer, c.question, c.question_entity, cfg);
        const RetrievalMatch raw = retrieval_metrics(record.retrieved->chain, c.gold_edited_chain);
        FactChain facts = record.retrieved->chain;
        if (options.prune) {
            record.prune = prune(scorer, c.question, facts, tmpl);
            facts = record.prune->selected_chain;
            if (options.emit_pre_prune_metrics) record.pre_prune = raw;
        }
        record.metrics = retrieval_metrics(facts, c.gold_edited_chain);
        record.outcome = answer_with_edit(backend, tmpl, c.question, facts, c.edited_answer, c.answer_aliases);
        record.matched = record.outcome->matched;
    } catch (const std::exception& e) {
        record.failed = true;
        record.error = e.what();
        record.matched = false;
        record.metrics = {};
        record.pre_prune.reset();
    }
    return record;
}

json record_to_json(const CaseRecord& r) {
    json j{{"case_id", r.case_id},
           {"hops", r.hops},
           {"status", r.failed ? "failed" : "ok"},
           {"matched", r.matched},
           {"pm", r.metrics.pm},
           {"em", r.metrics.em}};
    if (r.failed) j["error"] = r.error;
    j["retrieved"] = r.retrieved ? scored_subgraph_to_json(*r.retrieved) : json(nullptr);
    j["prune"] = r.prune ? prune_report_to_json(*r.prune) : json(nullptr);
    j["outcome"] = r.outcome ? edit_outcome_to_json(*r.outcome) : json(nullptr);
    if (r.pre_prune) j["pre_prune"] = match_to_json(*r.pre_prune);
    return j;
}

}  // namespace

std::vector<std::string> case_violations(const Case& c) {
    std::vector<std::string> problems;
    if (collapse_whitespace(c.question).empty()) problems.push_back("empty question");
    if (static_cast<std::size_t>(c.hops) != c.gold_edited_chain.hop_count()) {
        problems.push_back("hops " + std::to_string(c.hops) + " != edited chain length " +
                           std::to_string(c.gold_edited_chain.hop_count()));
    }
    const auto links = c.gold_edited_chain.links();
    for (const Edit& e : c.edits) {
        if (std::find(links.begin(), links.end(), e.edited_triple()) == links.end()) {
            problems.push_back("edit (" + e.head() + ", " + e.relation() + ", " + e.new_tail() +
                               ") not in the edited chain");
        }
    }
    if (normalize_label(c.edited_answer) != c.gold_edited_chain.back().tail()) {
        problems.push_back("edited_answer '" + c.edited_answer + "' is not the last chain tail '" +
                           c.gold_edited_chain.back().tail() + "'");
    }
    return problems;
}

Case case_from_json(const json& r, std::size_t line) {
    auto chain = [&](const char* key) {
        auto it = r.find(key);
        if (it == r.end()) throw ParseError(std::string("missing '") + key + "'");
        return chain_from_json(*it);
    };
    std::vector<Edit> edits;
    if (auto it = r.find("edits"); it != r.end()) {
        if (!it->is_array()) throw ParseError("'edits' must be an array");
        for (const auto& e : *it) edits.push_back(edit_from_json(e, line));
    }
    auto hops = r.find("hops");
    if (hops == r.end() || !hops->is_number_integer()) throw ParseError("missing integer 'hops'");
    return Case{required_string(r, "case_id", line),
                required_string(r, "question", line),
                normalize_label(required_string(r, "question_entity", line)),
                hops->get<int>(),
                chain("gold_pre_edit_chain"),
                chain("gold_edited_chain"),
                std::move(edits),
                r.value("original_answer", std::string()),
                required_string(r, "edited_answer", line),
                string_list(r, "answer_aliases")};
}

json case_to_json(const Case& c) {
    json edits = json::array();
    for (const Edit& e : c.edits) edits.push_back(edit_to_json(e));
    return json{{"case_id", c.case_id},
                {"question", c.question},
                {"question_entity", c.question_entity},
                {"hops", c.hops},
                {"gold_pre_edit_chain", chain_to_json(c.gold_pre_edit_chain)},
                {"gold_edited_chain", chain_to_json(c.gold_edited_chain)},
                {"edits", std::move(edits)},
                {"original_answer", c.original_answer},
                {"edited_answer", c.edited_answer},
                {"answer_aliases", c.answer_aliases}};
}

std::vector<Case> load_dataset(const std::filesystem::path& path) {
    std::vector<Case> cases;
    std::vector<std::string> rejected;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        const std::string id = r.value("case_id", "line " + std::to_string(line));
        try {
            Case c = case_from_json(r, line);
            auto problems = case_violations(c);
            if (!problems.empty()) {
                rejected.push_back(id + " (" + join(problems, "; ") + ")");
                return;
            }
            cases.push_back(std::move(c));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": line " + std::to_string(line) + " (" + id + "): " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": line " + std::to_string(line) + " (" + id + "): " + e.what());
        } catch (const InputError& e) {
            rejected.push_back(id + " (" + e.what() + ")");
        }
    });
    if (!rejected.empty()) {
        throw ValidationError(path.string() + ": rejected cases: " + join(rejected, ", "));
    }
    if (cases.empty()) std::clog << "warning: dataset " << path.string() << " contains no cases\n";
    return cases;
}

EditBank build_edit_bank(const std::vector<Case>& cases) {
    EditBank bank;
    // (head, relation) -> index of the first edit and its case.
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::string>> first;
    for (const Case& c : cases) {
        for (const Edit& e : c.edits) {
            if (std::find(bank.edits.begin(), bank.edits.end(), e) != bank.edits.end()) continue;
            auto key = std::make_pair(e.head(), e.relation());
            if (auto it = first.find(key); it != first.end()) {
                const Edit& prior = bank.edits[it->second.first];
                if (prior.new_tail() != e.new_tail()) {
                    throw ConflictError("conflicting edits on (" + e.head() + ", " + e.relation() + "): case " +
                                        it->second.second + " sets '" + prior.new_tail() + "', case " +
                                        c.case_id + " sets '" + e.new_tail() + "'");
                }
            } else {
                first.emplace(key, std::make_pair(bank.edits.size(), c.case_id));
            }
            bank.edits.push_back(e);
        }
    }
    return bank;
}

RetrievalMatch retrieval_metrics(const FactChain& retrieved, const FactChain& gold) {
    std::unordered_set<Triple, TripleHash> gold_set(gold.links().begin(), gold.links().end());
    RetrievalMatch m;
    m.em = true;
    for (const Triple& t : retrieved.links()) {
        const bool hit = gold_set.contains(t);
        m.pm = m.pm || hit;
        m.em = m.em && hit;
    }
    return m;
}

double percent(std::size_t num, std::size_t den) {
    if (den == 0) return 0.0;
    const std::size_t tenths = (2000 * num + den) / (2 * den);
    return static_cast<double>(tenths) / 10.0;
}

Aggregates metrics_aggregate(const std::vector<CaseRecord>& records, bool exclude_failures) {
    if (records.empty()) throw ValidationError("no records to aggregate");
    std::vector<const CaseRecord*> all;
    std::map<int, std::vector<const CaseRecord*>> groups;
    for (const CaseRecord& r : records) {
        all.push_back(&r);
        groups[r.hops].push_back(&r);
    }
    Aggregates out;
    out.overall = aggregate_group(all, exclude_failures);
    for (const auto& [hops, group] : groups) out.by_hops.emplace(hops, aggregate_group(group, exclude_failures));
    return out;
}

EvalReport evaluate_cases(const EditedKG& kg, const std::vector<Case>& cases, const Scorer& scorer,
                          const GenerationBackend& backend, const PromptTemplate& tmpl, const EvalOptions& options) {
    backend.validate();
    RetrievalConfig probe = options.retrieval;
    if (options.hops_override) probe.hops = *options.hops_override;
    probe.validate();
    if (options.extra_hops < 0) throw ValidationError("extra hops must be non-negative");

    EvalReport report;
    report.records.resize(cases.size());
    parallel_for(cases.size(), options.parallelism, [&](std::size_t i) {
        report.records[i] = evaluate_case(kg, cases[i], scorer, backend, tmpl, options);
    });
    if (!report.records.empty()) report.aggregates = metrics_aggregate(report.records, options.exclude_failures);

    report.config = json{{"beam_width", options.retrieval.beam_width},
                         {"max_relations_per_hop", options.retrieval.max_relations_per_hop},
                         {"include_question_prior", options.retrieval.include_question_prior},
                         {"hops", options.hops_override ? json(*options.hops_override) : json(nullptr)},
                         {"extra_hops", options.extra_hops},
                         {"prune", options.prune},
                         {"emit_pre_prune_metrics", options.emit_pre_prune_metrics},
                         {"exclude_failures", options.exclude_failures},
                         {"max_new_tokens", backend.max_new_tokens},
                         {"scorer", options.scorer_descriptor},
                         {"generator", options.generator_descriptor},
                         {"kg_triples", kg.size()},
                         {"kg_edited", kg.edited_count()},
                         {"cases", cases.size()}};
    return report;
}

EvalReport run_eval(const std::filesystem::path& kg_path, const std::filesystem::path& dataset_path,
                    const Scorer& scorer, const GenerationBackend& backend, const PromptTemplate& tmpl,
                    const EvalOptions& options, const std::filesystem::path& report_path) {
    const std::vector<Triple> base = read_triples(kg_path);
    const std::vector<Case> cases = load_dataset(dataset_path);
    const EditBank bank = build_edit_bank(cases);
    const EditedKG kg = build_kg(base, bank.edits);
    EvalReport report = evaluate_cases(kg, cases, scorer, backend, tmpl, options);
    report.config["edit_bank"] = bank.edits.size();
    if (!report_path.empty()) write_text_file(report_path, serialize_report(report));
    return report;
}

json eval_report_to_json(const EvalReport& report) {
    json records = json::array();
    for (const CaseRecord& r : report.records) records.push_back(record_to_json(r));
    json by_hops = json::object();
    for (const auto& [hops, agg] : report.aggregates.by_hops) by_hops[std::to_string(hops)] = aggregate_to_json(agg);
    return json{{"config", report.config},
                {"records", std::move(records)},
                {"aggregates", {{"overall", aggregate_to_json(report.aggregates.overall)}, {"by_hops", by_hops}}}};
}

std::string serialize_report(const EvalReport& report) {
    return eval_report_to_json(report).dump(2) + "\n";
}

}  // namespace rae
