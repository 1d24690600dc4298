#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cagp/types.hpp"

namespace cagp {

struct SplitPaths {
    std::string train;
    std::string valid;  // empty = split absent
    std::string test;
};

using SurfaceTriple = std::array<std::string, 3>;  // head, relation, tail

// Indexed knowledge graph. Immutable after load; safe for concurrent reads.
struct KnowledgeGraph {
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;
    std::unordered_map<std::string, EntityId> entity_index;
    std::unordered_map<std::string, RelationId> relation_index;
    std::map<std::string, std::vector<Triple>> splits;  // "train" | "valid" | "test"
    std::vector<std::uint64_t> freq;  // per-entity triple count over train

    std::size_t entity_count() const { return entity_names.size(); }
    std::size_t relation_count() const { return relation_names.size(); }

    // Throws InvalidInput for unknown split names.
    const std::vector<Triple>& split(const std::string& name) const;
    bool has_split(const std::string& name) const { return splits.count(name) > 0; }
};

// Vocabulary is the union of all splits, ids assigned in first-appearance
// order (train, then valid, then test). Duplicate triples are preserved.
KnowledgeGraph build_graph(const std::map<std::string, std::vector<SurfaceTriple>>& split_triples);

// Tab-separated head/relation/tail, one triple per line. Malformed lines
// raise ParseError with file and line number; an empty train split raises
// InvalidInput.
KnowledgeGraph load_tsv(const SplitPaths& paths);

void write_tsv(const KnowledgeGraph& kg, const SplitPaths& paths);

// Recompute freq from the train split (used after constructing a graph by
// hand, e.g. in the synthetic generator).
void recompute_frequencies(KnowledgeGraph& kg);

// Nearest-rank percentile of {freq(e) : e appears in train}. Each entity
// votes once; entities absent from train are excluded. percentile must lie
// in [0,1].
std::uint64_t frequency_threshold(const KnowledgeGraph& kg, double percentile);

struct FreqQuantiles {
    std::uint64_t min = 0, p10 = 0, p25 = 0, median = 0, p75 = 0, p90 = 0, max = 0;
    double mean = 0.0;
};

struct GraphStats {
    std::size_t entity_count = 0;
    std::size_t relation_count = 0;
    std::map<std::string, std::size_t> split_sizes;
    std::size_t train_entities = 0;  // entities with freq > 0
    FreqQuantiles freq_quantiles;    // over train-appearing entities
    std::string to_json() const;
};

GraphStats graph_stats(const KnowledgeGraph& kg);

}  // namespace cagp
