#pragma once

#include "rae/jsonl.hpp"

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace rae {

// A (head, relation, tail) fact. Labels are normalized on construction and
// are never empty afterwards.
class Triple {
public:
    Triple(std::string_view head, std::string_view relation, std::string_view tail);

    const std::string& head() const noexcept { return head_; }
    const std::string& relation() const noexcept { return relation_; }
    const std::string& tail() const noexcept { return tail_; }

    auto operator<=>(const Triple&) const = default;
    bool operator==(const Triple&) const = default;

private:
    std::string head_;
    std::string relation_;
    std::string tail_;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept;
};

// Tail replacement on (head, relation). Without an old tail the edit replaces
// every existing tail of (head, relation).
class Edit {
public:
    Edit(std::string_view head, std::string_view relation,
         std::optional<std::string_view> old_tail, std::string_view new_tail);

    const std::string& head() const noexcept { return head_; }
    const std::string& relation() const noexcept { return relation_; }
    const std::optional<std::string>& old_tail() const noexcept { return old_tail_; }
    const std::string& new_tail() const noexcept { return new_tail_; }

    Triple edited_triple() const { return Triple(head_, relation_, new_tail_); }

    bool operator==(const Edit&) const = default;

private:
    std::string head_;
    std::string relation_;
    std::optional<std::string> old_tail_;
    std::string new_tail_;
};

// Ordered triples where each tail is the head of the next link.
class FactChain {
public:
    // Throws ValidationError on an empty list, ChainError on broken linkage.
    static FactChain validate(std::vector<Triple> links);

    std::span<const Triple> links() const noexcept { return links_; }
    std::size_t hop_count() const noexcept { return links_.size(); }
    const Triple& operator[](std::size_t i) const { return links_[i]; }
    const Triple& front() const { return links_.front(); }
    const Triple& back() const { return links_.back(); }

    // First `length` links, 1 <= length <= hop_count().
    FactChain prefix(std::size_t length) const;

    bool operator==(const FactChain&) const = default;

private:
    explicit FactChain(std::vector<Triple> links) : links_(std::move(links)) {}
    std::vector<Triple> links_;
};

inline FactChain validate_chain(std::vector<Triple> links) {
    return FactChain::validate(std::move(links));
}

struct OutEdge {
    std::string relation;
    std::string tail;
    bool edited = false;

    bool operator==(const OutEdge&) const = default;
};

// Frozen knowledge graph: base triples with the edit bank merged in.
// Immutable, so any number of threads may read it concurrently.
class EditedKG {
public:
    EditedKG() = default;

    std::span<const Triple> triples() const noexcept { return triples_; }
    std::size_t size() const noexcept { return triples_.size(); }
    std::size_t edited_count() const noexcept { return edited_.size(); }

    bool contains(const Triple& t) const { return members_.contains(t); }
    bool is_edited(const Triple& t) const { return edited_.contains(t); }

    // Outgoing (relation, tail, edited) edges in insertion order; empty when
    // the entity is unknown.
    std::span<const OutEdge> outgoing(std::string_view entity) const;

private:
    friend class KgBuilder;

    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> members_;
    std::unordered_set<Triple, TripleHash> edited_;
    std::unordered_map<std::string, std::vector<OutEdge>> out_index_;
};

// Single-writer builder. Duplicate triples are no-ops; edits are applied in
// place and conflicting edits are rejected.
class KgBuilder {
public:
    KgBuilder& add_triple(const Triple& triple);
    KgBuilder& apply_edit(const Edit& edit);
    // Marks an already present triple as a member of the edit bank.
    KgBuilder& flag_edited(const Triple& triple);

    EditedKG freeze() const;

private:
    struct Slot {
        Triple triple;
        bool alive;
    };

    std::optional<std::size_t> find(const Triple& t) const;
    void insert_at_end(const Triple& t);

    std::vector<Slot> slots_;
    std::unordered_map<Triple, std::size_t, TripleHash> index_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_head_;
    std::unordered_set<Triple, TripleHash> edited_;
    // (head, relation) -> new tail of the edit already applied there.
    std::unordered_map<std::string, std::string> applied_edits_;
};

json triple_to_json(const Triple& t);
Triple triple_from_json(const json& record, std::size_t line = 0);
json chain_to_json(const FactChain& chain, const EditedKG* kg = nullptr);
FactChain chain_from_json(const json& array);

std::vector<Triple> read_triples(const std::filesystem::path& path);
std::vector<Edit> read_edits(const std::filesystem::path& path);
Edit edit_from_json(const json& record, std::size_t line = 0);
json edit_to_json(const Edit& e);

// Frozen KG file: one {head, relation, tail, edited} object per line.
void write_kg(const EditedKG& kg, std::ostream& out);
EditedKG read_kg(const std::filesystem::path& path);

EditedKG build_kg(std::span<const Triple> base, std::span<const Edit> edits);

}  // namespace rae
