#include "rae/cli.hpp"

#include "rae/editor.hpp"
#include "rae/error.hpp"
#include "rae/evalharness.hpp"
#include "rae/infotheory.hpp"
#include "rae/kgstore.hpp"
#include "rae/pruner.hpp"
#include "rae/remote.hpp"
#include "rae/retriever.hpp"
#include "rae/scorer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace rae::cli {

namespace {

struct RemoteFlags {
    std::string model;
    std::string generator_model;
    int timeout_ms = 30000;
    int max_retries = 3;
    int logprobs = 5;
    std::string api_key_env = "RAE_API_KEY";
    std::size_t max_in_flight = 4;
};

struct MockFlags {
    double epsilon = kDefaultEpsilon;
    std::vector<std::string> vocabulary;
};

EndpointConfig endpoint_config(const std::string& url, const RemoteFlags& f, const std::string& model) {
    EndpointConfig cfg;
    cfg.url = url;
    cfg.model = model;
    cfg.timeout = std::chrono::milliseconds(f.timeout_ms);
    cfg.max_retries = f.max_retries;
    cfg.top_logprobs = f.logprobs;
    cfg.api_key_env = f.api_key_env;
    cfg.max_in_flight = f.max_in_flight;
    return cfg;
}

std::pair<std::string, std::string> split_descriptor(const std::string& descriptor, const char* what) {
    const auto colon = descriptor.find(':');
    if (colon == std::string::npos) {
        throw ValidationError(std::string(what) + " must be mock:<file> or remote:<url>, got '" + descriptor + "'");
    }
    return {descriptor.substr(0, colon), descriptor.substr(colon + 1)};
}

std::shared_ptr<const Scorer> make_scorer(const std::string& descriptor, const MockFlags& mock,
                                          const RemoteFlags& remote) {
    auto [kind, target] = split_descriptor(descriptor, "--scorer");
    if (kind == "mock") return make_mock_scorer(load_mock_table(target), mock.vocabulary, mock.epsilon);
    if (kind == "remote") return make_remote_scorer(endpoint_config(target, remote, remote.model));
    throw ValidationError("unknown scorer backend '" + kind + "'");
}

std::shared_ptr<const Generator> make_generator(const std::string& descriptor, const RemoteFlags& remote) {
    auto [kind, target] = split_descriptor(descriptor, "--generator");
    if (kind == "mock") return load_mock_generator(target);
    if (kind == "remote") {
        const std::string& model = remote.generator_model.empty() ? remote.model : remote.generator_model;
        return make_remote_generator(endpoint_config(target, remote, model));
    }
    throw ValidationError("unknown generator backend '" + kind + "'");
}

const PromptTemplate& load_template(const std::string& path, std::optional<PromptTemplate>& storage) {
    if (path.empty()) return PromptTemplate::standard();
    storage = PromptTemplate::load(path);
    return *storage;
}

// Accepts a bare chain array, a retrieve record ("chain"), or a prune report
// ("selected_chain").
FactChain read_chain_file(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (doc.is_object()) {
        if (doc.contains("selected_chain")) return chain_from_json(doc["selected_chain"]);
        if (doc.contains("chain")) return chain_from_json(doc["chain"]);
        throw ParseError(path + ": object has no 'chain' or 'selected_chain'");
    }
    return chain_from_json(doc);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text_file(path, text);
    }
}

void add_remote_flags(CLI::App* cmd, RemoteFlags& f) {
    cmd->add_option("--model", f.model, "Model name sent to remote endpoints");
    cmd->add_option("--timeout-ms", f.timeout_ms, "Remote request timeout in milliseconds");
    cmd->add_option("--max-retries", f.max_retries, "Attempts per remote request");
    cmd->add_option("--logprobs", f.logprobs, "Top-K logprobs requested from remote endpoints");
    cmd->add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
    cmd->add_option("--max-in-flight", f.max_in_flight, "Maximum concurrent remote requests");
}

void add_mock_flags(CLI::App* cmd, MockFlags& f) {
    cmd->add_option("--epsilon", f.epsilon, "Probability floor for unseen mock continuations");
    cmd->add_option("--vocab", f.vocabulary, "Explicit mock vocabulary")->delimiter(',');
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retrieval-augmented in-context knowledge editing", "rae"};
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
    app.require_subcommand(1);

    RemoteFlags remote;
    MockFlags mock;

    // build-kg
    std::string triples_path, edits_path, kg_out;
    auto* build = app.add_subcommand("build-kg", "Merge base triples and edits into a frozen KG file");
    build->add_option("--triples", triples_path, "Base triples (JSONL)")->required()->check(CLI::ExistingFile);
    build->add_option("--edits", edits_path, "Edits (JSONL)")->check(CLI::ExistingFile);
    build->add_option("--out", kg_out, "Output KG file")->required();

    // retrieve
    std::string kg_path, question, entity, scorer_desc, out_path;
    RetrievalConfig rcfg;
    bool exhaustive = false;
    auto* retrieve = app.add_subcommand("retrieve", "Retrieve a fact chain for one question");
    retrieve->add_option("--kg", kg_path, "Frozen KG file from build-kg")->required()->check(CLI::ExistingFile);
    retrieve->add_option("--question", question, "Question text")->required();
    retrieve->add_option("--entity", entity, "Question entity (start of the chain)")->required();
    retrieve->add_option("--hops", rcfg.hops, "Number of hops n")->capture_default_str();
    retrieve->add_option("--beam", rcfg.beam_width, "Beam width")->capture_default_str();
    retrieve->add_option("--max-relations", rcfg.max_relations_per_hop, "Per-entity relation cap")
        ->capture_default_str();
    retrieve->add_flag("--question-prior", rcfg.include_question_prior, "Add log p(question | entity)");
    retrieve->add_option("--parallelism", rcfg.parallelism, "Concurrent scoring calls per hop");
    retrieve->add_flag("--exhaustive", exhaustive, "Use the exhaustive oracle instead of beam search");
    retrieve->add_option("--scorer", scorer_desc, "mock:<table.jsonl> or remote:<url>")->required();
    retrieve->add_option("--out", out_path, "Output file (default stdout)");
    add_remote_flags(retrieve, remote);
    add_mock_flags(retrieve, mock);

    // prune
    std::string chain_path, template_path;
    auto* prune_cmd = app.add_subcommand("prune", "Select the minimum-entropy prefix of a chain");
    prune_cmd->add_option("--question", question, "Question text")->required();
    prune_cmd->add_option("--chain", chain_path, "Chain JSON or retrieve output")->required()->check(CLI::ExistingFile);
    prune_cmd->add_option("--scorer", scorer_desc, "mock:<table.jsonl> or remote:<url>")->required();
    prune_cmd->add_option("--template", template_path, "Editing template file")->check(CLI::ExistingFile);
    prune_cmd->add_option("--out", out_path, "Output file (default stdout)");
    add_remote_flags(prune_cmd, remote);
    add_mock_flags(prune_cmd, mock);

    // edit
    std::string generator_desc, target;
    std::vector<std::string> aliases;
    int max_new_tokens = kDefaultMaxNewTokens;
    auto* edit_cmd = app.add_subcommand("edit", "Answer a question with facts in context");
    edit_cmd->add_option("--question", question, "Question text")->required();
    edit_cmd->add_option("--chain", chain_path, "Chain JSON, retrieve or prune output")
        ->required()
        ->check(CLI::ExistingFile);
    edit_cmd->add_option("--generator", generator_desc, "mock:<completions.jsonl> or remote:<url>")->required();
    edit_cmd->add_option("--target", target, "Expected edited answer")->required();
    edit_cmd->add_option("--alias", aliases, "Accepted answer alias (repeatable)");
    edit_cmd->add_option("--max-new-tokens", max_new_tokens, "Generation budget")->capture_default_str();
    edit_cmd->add_option("--template", template_path, "Editing template file")->check(CLI::ExistingFile);
    edit_cmd->add_option("--out", out_path, "Output file (default stdout)");
    add_remote_flags(edit_cmd, remote);
    edit_cmd->add_option("--generator-model", remote.generator_model, "Model name for the generator endpoint");

    // eval
    std::string dataset_path, report_path;
    EvalOptions eopts;
    int fixed_hops = 0;
    bool no_prune = false;
    auto* eval_cmd = app.add_subcommand("eval", "Run retrieval, pruning and editing over a dataset");
    eval_cmd->add_option("--kg", kg_path, "Base triples (JSONL)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--dataset", dataset_path, "Cases (JSONL)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--scorer", scorer_desc, "mock:<table.jsonl> or remote:<url>")->required();
    eval_cmd->add_option("--generator", generator_desc, "mock:<completions.jsonl> or remote:<url>")->required();
    eval_cmd->add_option("--template", template_path, "Editing template file")->check(CLI::ExistingFile);
    eval_cmd->add_option("--report", report_path, "Report file (default stdout)");
    eval_cmd->add_option("--hops", fixed_hops, "Fixed hop count n (default K + extra hops)");
    eval_cmd->add_option("--extra-hops", eopts.extra_hops, "Hops added to each case's K")->capture_default_str();
    eval_cmd->add_option("--beam", eopts.retrieval.beam_width, "Beam width")->capture_default_str();
    eval_cmd->add_option("--max-relations", eopts.retrieval.max_relations_per_hop, "Per-entity relation cap");
    eval_cmd->add_flag("--question-prior", eopts.retrieval.include_question_prior, "Add log p(question | entity)");
    eval_cmd->add_flag("--no-prune", no_prune, "Skip entropy pruning");
    eval_cmd->add_flag("--exclude-failures", eopts.exclude_failures, "Drop failed cases from denominators");
    eval_cmd->add_option("--parallelism", eopts.parallelism, "Cases evaluated concurrently");
    eval_cmd->add_option("--max-new-tokens", max_new_tokens, "Generation budget")->capture_default_str();
    add_remote_flags(eval_cmd, remote);
    add_mock_flags(eval_cmd, mock);
    eval_cmd->add_option("--generator-model", remote.generator_model, "Model name for the generator endpoint");

    // dpi-check
    int trials = 1000;
    int max_alphabet = 5;
    std::uint64_t seed = 0;
    auto* dpi = app.add_subcommand("dpi-check", "Check the data-processing inequality on random Markov chains");
    dpi->add_option("--trials", trials, "Number of random joints")->capture_default_str();
    dpi->add_option("--max-alphabet", max_alphabet, "Largest alphabet size")->capture_default_str();
    dpi->add_option("--seed", seed, "RNG seed")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInput;
    }

    try {
        if (build->parsed()) {
            std::vector<Edit> edits;
            if (!edits_path.empty()) edits = read_edits(edits_path);
            const EditedKG kg = build_kg(read_triples(triples_path), edits);
            std::ostringstream buf;
            write_kg(kg, buf);
            write_text_file(kg_out, buf.str());
            out << "wrote " << kg.size() << " triples (" << kg.edited_count() << " edited) to " << kg_out << "\n";
        } else if (retrieve->parsed()) {
            const EditedKG kg = read_kg(kg_path);
            auto scorer = make_scorer(scorer_desc, mock, remote);
            const ScoredSubgraph s =
                exhaustive ? exhaustive_retrieve(kg, *scorer, question, entity, rcfg.hops, kDefaultPathBound,
                                                 rcfg.include_question_prior)
                           : beam_search_retrieve(kg, *scorer, question, entity, rcfg);
            emit(out_path, scored_subgraph_to_json(s).dump(2) + "\n", out);
        } else if (prune_cmd->parsed()) {
            std::optional<PromptTemplate> storage;
            const PromptTemplate& tmpl = load_template(template_path, storage);
            auto scorer = make_scorer(scorer_desc, mock, remote);
            const PruneReport report = prune(*scorer, question, read_chain_file(chain_path), tmpl);
            emit(out_path, prune_report_to_json(report).dump(2) + "\n", out);
        } else if (edit_cmd->parsed()) {
            std::optional<PromptTemplate> storage;
            const PromptTemplate& tmpl = load_template(template_path, storage);
            GenerationBackend backend{make_generator(generator_desc, remote), max_new_tokens};
            const EditOutcome outcome =
                answer_with_edit(backend, tmpl, question, read_chain_file(chain_path), target, aliases);
            emit(out_path, edit_outcome_to_json(outcome).dump(2) + "\n", out);
        } else if (eval_cmd->parsed()) {
            std::optional<PromptTemplate> storage;
            const PromptTemplate& tmpl = load_template(template_path, storage);
            auto scorer = make_scorer(scorer_desc, mock, remote);
            GenerationBackend backend{make_generator(generator_desc, remote), max_new_tokens};
            if (fixed_hops > 0) eopts.hops_override = fixed_hops;
            eopts.prune = !no_prune;
            eopts.scorer_descriptor = scorer_desc;
            eopts.generator_descriptor = generator_desc;
            const EvalReport report = run_eval(kg_path, dataset_path, *scorer, backend, tmpl, eopts, report_path);
            if (report_path.empty()) out << serialize_report(report);
        } else if (dpi->parsed()) {
            const info::DpiSummary s = info::run_dpi_trials(trials, max_alphabet, seed);
            out << json{{"trials", s.trials}, {"held", s.held}, {"min_margin", s.min_margin}}.dump() << "\n";
            return s.held == s.trials ? kExitOk : kExitInput;
        }
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

}  // namespace rae::cli
