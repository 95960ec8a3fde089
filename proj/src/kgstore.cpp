#include "rae/kgstore.hpp"

#include "rae/error.hpp"
#include "rae/text.hpp"

#include <fstream>
#include <functional>

namespace rae {

namespace {

std::string checked_label(std::string_view raw, const char* field) {
    std::string label = normalize_label(raw);
    if (label.empty()) {
        throw ValidationError(std::string("empty ") + field + " label");
    }
    return label;
}

std::string relation_key(const std::string& head, const std::string& relation) {
    std::string key = head;
    key.push_back('\x1f');
    key += relation;
    return key;
}

}  // namespace

Triple::Triple(std::string_view head, std::string_view relation, std::string_view tail)
    : head_(checked_label(head, "head")),
      relation_(checked_label(relation, "relation")),
      tail_(checked_label(tail, "tail")) {}

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
    std::hash<std::string> h;
    std::size_t seed = h(t.head());
    seed ^= h(t.relation()) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    seed ^= h(t.tail()) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
    return seed;
}

Edit::Edit(std::string_view head, std::string_view relation,
           std::optional<std::string_view> old_tail, std::string_view new_tail)
    : head_(checked_label(head, "head")),
      relation_(checked_label(relation, "relation")),
      new_tail_(checked_label(new_tail, "new_tail")) {
    if (old_tail) {
        old_tail_ = checked_label(*old_tail, "old_tail");
        if (*old_tail_ == new_tail_) {
            throw ValidationError("edit on (" + head_ + ", " + relation_ +
                                  ") has old_tail equal to new_tail");
        }
    }
}

FactChain FactChain::validate(std::vector<Triple> links) {
    if (links.empty()) throw ValidationError("fact chain is empty");
    for (std::size_t i = 1; i < links.size(); ++i) {
        if (links[i - 1].tail() != links[i].head()) {
            throw ChainError("fact chain broken at index " + std::to_string(i) + ": tail '" +
                                 links[i - 1].tail() + "' != head '" + links[i].head() + "'",
                             i);
        }
    }
    return FactChain(std::move(links));
}

FactChain FactChain::prefix(std::size_t length) const {
    if (length == 0 || length > links_.size()) {
        throw ValidationError("prefix length " + std::to_string(length) + " outside 1.." +
                              std::to_string(links_.size()));
    }
    return FactChain(std::vector<Triple>(links_.begin(), links_.begin() + static_cast<std::ptrdiff_t>(length)));
}

std::span<const OutEdge> EditedKG::outgoing(std::string_view entity) const {
    auto it = out_index_.find(normalize_label(entity));
    if (it == out_index_.end()) return {};
    return it->second;
}

std::optional<std::size_t> KgBuilder::find(const Triple& t) const {
    auto it = index_.find(t);
    if (it == index_.end() || !slots_[it->second].alive) return std::nullopt;
    return it->second;
}

void KgBuilder::insert_at_end(const Triple& t) {
    std::size_t pos = slots_.size();
    slots_.push_back({t, true});
    index_.insert_or_assign(t, pos);
    by_head_[t.head()].push_back(pos);
}

KgBuilder& KgBuilder::add_triple(const Triple& triple) {
    if (!find(triple)) insert_at_end(triple);
    return *this;
}

KgBuilder& KgBuilder::flag_edited(const Triple& triple) {
    if (!find(triple)) {
        throw ValidationError("cannot flag absent triple (" + triple.head() + ", " +
                              triple.relation() + ", " + triple.tail() + ")");
    }
    edited_.insert(triple);
    return *this;
}

KgBuilder& KgBuilder::apply_edit(const Edit& edit) {
    const std::string key = relation_key(edit.head(), edit.relation());
    if (auto it = applied_edits_.find(key); it != applied_edits_.end()) {
        if (it->second != edit.new_tail()) {
            throw ConflictError("conflicting edits on (" + edit.head() + ", " + edit.relation() +
                                "): '" + it->second + "' vs '" + edit.new_tail() + "'");
        }
    } else {
        applied_edits_.emplace(key, edit.new_tail());
    }

    const Triple target = edit.edited_triple();
    const bool target_present = find(target).has_value();

    // Slots on (head, relation) that the edit retires.
    std::vector<std::size_t> retired;
    if (auto heads = by_head_.find(edit.head()); heads != by_head_.end()) {
        for (std::size_t pos : heads->second) {
            const Slot& slot = slots_[pos];
            if (!slot.alive || slot.triple.relation() != edit.relation()) continue;
            if (slot.triple.tail() == edit.new_tail()) continue;
            if (edit.old_tail() && slot.triple.tail() != *edit.old_tail()) continue;
            retired.push_back(pos);
        }
    }

    for (std::size_t i = 0; i < retired.size(); ++i) {
        Slot& slot = slots_[retired[i]];
        if (i == 0 && !target_present) {
            // The new fact takes the place of the first fact it replaces.
            index_.erase(slot.triple);
            slot.triple = target;
            index_.insert_or_assign(target, retired[i]);
        } else {
            slot.alive = false;
        }
    }
    if (retired.empty() && !target_present) insert_at_end(target);

    edited_.insert(target);
    return *this;
}

EditedKG KgBuilder::freeze() const {
    EditedKG kg;
    kg.triples_.reserve(slots_.size());
    for (const Slot& slot : slots_) {
        if (!slot.alive) continue;
        const Triple& t = slot.triple;
        kg.triples_.push_back(t);
        kg.members_.insert(t);
        const bool edited = edited_.contains(t);
        if (edited) kg.edited_.insert(t);
        kg.out_index_[t.head()].push_back({t.relation(), t.tail(), edited});
    }
    return kg;
}

json triple_to_json(const Triple& t) {
    return json{{"head", t.head()}, {"relation", t.relation()}, {"tail", t.tail()}};
}

Triple triple_from_json(const json& record, std::size_t line) {
    if (!record.is_object()) {
        throw ParseError("line " + std::to_string(line) + ": triple must be an object");
    }
    return Triple(required_string(record, "head", line), required_string(record, "relation", line),
                  required_string(record, "tail", line));
}

json chain_to_json(const FactChain& chain, const EditedKG* kg) {
    json out = json::array();
    for (const Triple& t : chain.links()) {
        json j = triple_to_json(t);
        if (kg) j["edited"] = kg->is_edited(t);
        out.push_back(std::move(j));
    }
    return out;
}

FactChain chain_from_json(const json& array) {
    if (!array.is_array()) throw ParseError("fact chain must be a JSON array");
    std::vector<Triple> links;
    for (const auto& item : array) links.push_back(triple_from_json(item));
    return FactChain::validate(std::move(links));
}

Edit edit_from_json(const json& record, std::size_t line) {
    std::optional<std::string> old_tail;
    if (auto it = record.find("old_tail"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw ParseError("line " + std::to_string(line) + ": old_tail must be a string");
        }
        old_tail = it->get<std::string>();
    }
    return Edit(required_string(record, "head", line), required_string(record, "relation", line),
                old_tail ? std::optional<std::string_view>(*old_tail) : std::nullopt,
                required_string(record, "new_tail", line));
}

json edit_to_json(const Edit& e) {
    json j{{"head", e.head()}, {"relation", e.relation()}, {"new_tail", e.new_tail()}};
    if (e.old_tail()) j["old_tail"] = *e.old_tail();
    return j;
}

std::vector<Triple> read_triples(const std::filesystem::path& path) {
    std::vector<Triple> out;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        try {
            out.push_back(triple_from_json(r, line));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

std::vector<Edit> read_edits(const std::filesystem::path& path) {
    std::vector<Edit> out;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        try {
            out.push_back(edit_from_json(r, line));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

void write_kg(const EditedKG& kg, std::ostream& out) {
    for (const Triple& t : kg.triples()) {
        json j = triple_to_json(t);
        j["edited"] = kg.is_edited(t);
        out << j.dump() << '\n';
    }
}

EditedKG read_kg(const std::filesystem::path& path) {
    KgBuilder builder;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        Triple t = triple_from_json(r, line);
        builder.add_triple(t);
        if (r.value("edited", false)) builder.flag_edited(t);
    });
    return builder.freeze();
}

EditedKG build_kg(std::span<const Triple> base, std::span<const Edit> edits) {
    KgBuilder builder;
    for (const Triple& t : base) builder.add_triple(t);
    for (const Edit& e : edits) builder.apply_edit(e);
    return builder.freeze();
}

}  // namespace rae
