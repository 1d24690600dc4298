#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cagp/graph.hpp"
#include "cagp/types.hpp"

namespace cagp {

enum class CoverageMode { Binary, LogScaled, TfIdf };

CoverageMode coverage_mode_from_string(const std::string& s);
std::string to_string(CoverageMode mode);

// Sparse entity-relation co-occurrence built from the training split only.
// (e,r) is observed iff e appears as head or tail of some training triple
// with relation r. Immutable after build; lookups are O(1) average.
struct CoverageMatrix {
    std::unordered_map<std::uint64_t, std::uint32_t> counts;  // (e,r) -> co-occurrence count
    std::vector<std::uint64_t> relation_totals;               // per-relation observed-pair count
    std::vector<std::uint64_t> entity_totals;                 // per-entity sum of counts
    std::vector<std::uint32_t> relation_entity_counts;        // distinct entities observed with r
    std::uint32_t max_pair_count = 0;
    std::size_t entity_count = 0;
    std::size_t relation_count = 0;
    double max_tfidf = 0.0;  // normalization constant for TfIdf mode

    static std::uint64_t key(EntityId e, RelationId r) {
        return (static_cast<std::uint64_t>(e) << 32) | r;
    }

    std::uint32_t count(EntityId e, RelationId r) const {
        auto it = counts.find(key(e, r));
        return it == counts.end() ? 0u : it->second;
    }

    bool observed(EntityId e, RelationId r) const { return counts.count(key(e, r)) > 0; }
};

CoverageMatrix build_coverage(const KnowledgeGraph& kg);

// 2 - c(h,r) - c(t,r) with binary coverage; exact integer in {0,1,2}.
int structural_uncertainty(const CoverageMatrix& c, const Triple& q);

// Per-slot continuous coverage g(e,r) in [0,1]; 1 for the strongest
// observed pair, 0 for unobserved pairs (agreeing with binary there).
//   LogScaled: ln(1+n(e,r)) / ln(1+n_max)
//   TfIdf:     tf*idf scaled by the global max, clamped to [0,1], with
//              tf = n(e,r)/sum_r' n(e,r') and
//              idf = ln(|E| / (1 + |{e' : n(e',r)>0}|))
double continuous_slot_coverage(const CoverageMatrix& c, EntityId e, RelationId r, CoverageMode mode);

// 2 - g(h,r) - g(t,r); equals structural_uncertainty in Binary mode.
double continuous_coverage(const CoverageMatrix& c, const Triple& q, CoverageMode mode);

// Sorted (entity, relation, count) rows.
void write_coverage_csv(const CoverageMatrix& c, const std::string& path);

}  // namespace cagp
