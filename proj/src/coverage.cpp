#include "cagp/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cagp {

CoverageMode coverage_mode_from_string(const std::string& s) {
    if (s == "binary") return CoverageMode::Binary;
    if (s == "log_scaled") return CoverageMode::LogScaled;
    if (s == "tfidf") return CoverageMode::TfIdf;
    throw InvalidInput("unknown coverage mode: " + s);
}

std::string to_string(CoverageMode mode) {
    switch (mode) {
        case CoverageMode::Binary: return "binary";
        case CoverageMode::LogScaled: return "log_scaled";
        case CoverageMode::TfIdf: return "tfidf";
    }
    return "binary";
}

CoverageMatrix build_coverage(const KnowledgeGraph& kg) {
    if (kg.split("train").empty()) throw InvalidInput("train split is empty");
    CoverageMatrix c;
    c.entity_count = kg.entity_count();
    c.relation_count = kg.relation_count();
    c.relation_totals.assign(c.relation_count, 0);
    c.entity_totals.assign(c.entity_count, 0);
    c.relation_entity_counts.assign(c.relation_count, 0);
    for (const Triple& t : kg.split("train")) {
        for (EntityId e : {t.head, t.tail}) {
            auto [it, inserted] = c.counts.try_emplace(CoverageMatrix::key(e, t.relation), 0u);
            if (inserted) {
                c.relation_totals[t.relation] += 1;
                c.relation_entity_counts[t.relation] += 1;
            }
            it->second += 1;
            c.entity_totals[e] += 1;
            c.max_pair_count = std::max(c.max_pair_count, it->second);
        }
    }
    // Global TfIdf normalizer over observed pairs.
    double max_tfidf = 0.0;
    for (const auto& [key, n] : c.counts) {
        EntityId e = static_cast<EntityId>(key >> 32);
        RelationId r = static_cast<RelationId>(key & 0xffffffffu);
        double tf = static_cast<double>(n) / static_cast<double>(c.entity_totals[e]);
        double idf = std::log(static_cast<double>(c.entity_count) /
                              (1.0 + static_cast<double>(c.relation_entity_counts[r])));
        max_tfidf = std::max(max_tfidf, tf * idf);
    }
    c.max_tfidf = max_tfidf;
    return c;
}

int structural_uncertainty(const CoverageMatrix& c, const Triple& q) {
    return 2 - (c.observed(q.head, q.relation) ? 1 : 0) - (c.observed(q.tail, q.relation) ? 1 : 0);
}

double continuous_slot_coverage(const CoverageMatrix& c, EntityId e, RelationId r, CoverageMode mode) {
    std::uint32_t n = c.count(e, r);
    if (n == 0) return 0.0;
    switch (mode) {
        case CoverageMode::Binary:
            return 1.0;
        case CoverageMode::LogScaled: {
            if (c.max_pair_count == 0) return 0.0;
            return std::log1p(static_cast<double>(n)) /
                   std::log1p(static_cast<double>(c.max_pair_count));
        }
        case CoverageMode::TfIdf: {
            double tf = static_cast<double>(n) / static_cast<double>(c.entity_totals[e]);
            double idf = std::log(static_cast<double>(c.entity_count) /
                                  (1.0 + static_cast<double>(c.relation_entity_counts[r])));
            if (c.max_tfidf <= 0.0) return 0.0;
            double g = tf * idf / c.max_tfidf;
            return std::clamp(g, 0.0, 1.0);
        }
    }
    return 0.0;
}

double continuous_coverage(const CoverageMatrix& c, const Triple& q, CoverageMode mode) {
    return 2.0 - continuous_slot_coverage(c, q.head, q.relation, mode) -
           continuous_slot_coverage(c, q.tail, q.relation, mode);
}

void write_coverage_csv(const CoverageMatrix& c, const std::string& path) {
    std::vector<std::uint64_t> keys;
    keys.reserve(c.counts.size());
    for (const auto& [key, _] : c.counts) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << "entity,relation,count\n";
    for (std::uint64_t key : keys) {
        out << (key >> 32) << ',' << (key & 0xffffffffu) << ',' << c.counts.at(key) << '\n';
    }
}

}  // namespace cagp
