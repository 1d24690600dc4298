#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cagp/coverage.hpp"
#include "cagp/embed.hpp"
#include "cagp/graph.hpp"
#include "cagp/oodgen.hpp"
#include "cagp/uncertainty.hpp"

namespace cagp {

// Rank correlation with average ranks for ties; throws UndefinedMetric when
// either input is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Empirical checks of the assumptions behind the impossibility and
// complementarity results. Rows computed on an empty partition class are
// left unset.
struct AssumptionReport {
    std::optional<double> a1_spearman;        // rho(freq, mean variance), train entities
    std::optional<double> a2_coverage_rate;   // P(U_str = 0 | ID)
    std::vector<std::uint64_t> a3_epsilons;
    std::vector<double> a3_matched_fraction;
    std::optional<double> a4_delta;           // max_ID Usem~ - min_novel Usem~
    std::optional<double> a4_delta_raw;       // same on the raw scale
    std::optional<double> a5_rho;             // P(U_str = 0 | emerging)
    std::optional<double> a6_auroc_emerging;  // semantic AUROC, emerging vs ID
    std::optional<double> semantic_on_novel;  // predicted ~0.5
    std::optional<double> structural_on_novel;  // predicted 1.0

    std::string to_json() const;
    std::string to_text() const;
};

AssumptionReport assumption_report(const KnowledgeGraph& kg, const CoverageMatrix& c,
                                   const GaussianEmbeddingModel& m, const SemanticNormalizer& n,
                                   const OodPartition& p,
                                   const std::vector<std::uint64_t>& epsilons);

// Stratified AUROC of each signal on (emerging|novel|all OOD) vs ID.
struct ComplementarityTable {
    struct Row {
        std::string signal;
        std::optional<double> emerging;
        std::optional<double> novel;
        std::optional<double> overall;
    };
    std::vector<Row> rows;

    std::string to_json() const;
    std::string to_text() const;
    void write_csv(const std::string& path) const;
};

ComplementarityTable complementarity_table(const GaussianEmbeddingModel& m,
                                           const SemanticNormalizer& n, const CoverageMatrix& c,
                                           const MixingWeight& w, const OodPartition& p);

}  // namespace cagp
