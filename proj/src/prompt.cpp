#include "rae/prompt.hpp"

#include "rae/error.hpp"
#include "rae/jsonl.hpp"
#include "rae/scorer.hpp"
#include "rae/text.hpp"

namespace rae {

namespace {

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string body, std::string preamble, std::vector<Exemplar> exemplars)
    : preamble_(std::move(preamble)), body_(std::move(body)), exemplars_(std::move(exemplars)) {
    if (count_occurrences(body_, kFactsSlot) != 1) {
        throw ValidationError("template must contain exactly one {{facts}} placeholder");
    }
    if (count_occurrences(body_, kQuestionSlot) != 1) {
        throw ValidationError("template must contain exactly one {{question}} placeholder");
    }
    for (const auto& ex : exemplars_) {
        if (ex.facts.empty()) throw ValidationError("demonstration without facts");
    }
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return PromptTemplate(read_text_file(path));
}

const PromptTemplate& PromptTemplate::standard() {
    static const PromptTemplate tmpl(
        "Given fact: {{facts}}\n{{question}}\nAnswer:", "",
        {
            {{Triple("Eiffel Tower", "located in", "Rome"), Triple("Rome", "country", "Italy")},
             "In which country is the Eiffel Tower located?",
             "Italy"},
            {{Triple("Inception", "director", "Greta Gerwig"),
              Triple("Greta Gerwig", "educated at", "Barnard College")},
             "Where was the director of Inception educated?",
             "Barnard College"},
            {{Triple("Toyota", "headquarters location", "Munich"), Triple("Munich", "country", "Germany"),
              Triple("Germany", "official language", "Portuguese")},
             "What is the official language of the country where Toyota is headquartered?",
             "Portuguese"},
        });
    return tmpl;
}

std::string PromptTemplate::fill(std::string_view question, std::span<const Triple> facts) const {
    // Replace the later slot first so the earlier offset stays valid.
    const std::size_t facts_pos = body_.find(kFactsSlot);
    const std::size_t question_pos = body_.find(kQuestionSlot);
    std::string out = body_;
    const std::string facts_text = format_facts(facts);
    const std::string question_text = format_question(question);
    if (facts_pos > question_pos) {
        out.replace(facts_pos, kFactsSlot.size(), facts_text);
        out.replace(question_pos, kQuestionSlot.size(), question_text);
    } else {
        out.replace(question_pos, kQuestionSlot.size(), question_text);
        out.replace(facts_pos, kFactsSlot.size(), facts_text);
    }
    return out;
}

std::string PromptTemplate::demonstrations() const {
    std::string out = preamble_;
    for (const auto& ex : exemplars_) {
        out += fill(ex.question, ex.facts);
        out += " ";
        out += ex.answer;
        out += "\n\n";
    }
    return out;
}

std::string format_facts(std::span<const Triple> facts) {
    std::string out;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (i) out.push_back('\n');
        out += verbalize_fact(facts[i]);
    }
    return out;
}

std::string format_question(std::string_view question) {
    std::string q = collapse_whitespace(question);
    if (q.empty() || q.back() != '?') q.push_back('?');
    return q;
}

std::string build_edit_prompt(const PromptTemplate& tmpl, std::string_view question, std::span<const Triple> facts) {
    if (facts.empty()) throw ValidationError("editing prompt needs at least one fact");
    return tmpl.demonstrations() + tmpl.fill(question, facts);
}

std::string build_edit_prompt(const PromptTemplate& tmpl, std::string_view question, const FactChain& facts) {
    return build_edit_prompt(tmpl, question, facts.links());
}

}  // namespace rae
