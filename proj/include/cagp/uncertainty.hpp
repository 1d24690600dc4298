#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cagp/coverage.hpp"
#include "cagp/embed.hpp"
#include "cagp/graph.hpp"
#include "cagp/types.hpp"

namespace cagp {

// Affine map from the raw semantic range observed on training entities onto
// [0,2], clamped outside. Fit on train only so no evaluation labels leak
// into the score scale.
struct SemanticNormalizer {
    double lo = 0.0;
    double hi = 0.0;

    double normalize(double u) const;
};

struct MixingWeight {
    double lambda = 0.0;  // alpha = sigmoid(lambda)

    double alpha() const;
    static MixingWeight from_alpha(double alpha);
};

struct UncertaintyAssessment {
    Triple triple{};
    double u_sem_raw = 0.0;
    double u_sem_norm = 0.0;
    double u_str = 0.0;
    double u_cagp = 0.0;
    double alpha_used = 0.0;
};

// (sigma2_h + sigma2_t) / 2; relation-agnostic by construction.
double semantic_uncertainty(const GaussianEmbeddingModel& m, const Triple& q);

SemanticNormalizer fit_normalizer(const GaussianEmbeddingModel& m, const KnowledgeGraph& kg);

// alpha * u_sem_norm + (1 - alpha) * u_str.
double combine_cagp(const MixingWeight& w, double u_sem_norm, double u_str);

// Validation pairs used by fit_alpha: normalized semantic and structural
// uncertainty plus the OOD label.
struct ValidationPoint {
    double u_sem_norm = 0.0;
    double u_str = 0.0;
    bool is_ood = false;
};

// Deterministic grid search over alpha in {0.00, 0.01, ..., 1.00} with the
// endpoints mapped to 0.005/0.995; the grid point maximizing validation
// AUROC wins, ties broken toward the alpha nearest 0.5 (then the smaller
// alpha). Throws InvalidInput when either class is empty.
MixingWeight fit_alpha(const std::vector<ValidationPoint>& validation);
MixingWeight fit_alpha(const std::vector<UncertaintyAssessment>& val_id,
                       const std::vector<UncertaintyAssessment>& val_ood);

struct BaselineOptions {
    int draws = 10;
    std::uint64_t seed = 0;
    double noise_scale = 1.0;  // 0 evaluates at the means
};

// Generic score-based baseline: negative mean score over sampled embeddings
// (higher = more uncertain). Noise is derived per (seed, triple, draw), so
// the value is a pure function of its inputs.
double baseline_score_uncertainty(const GaussianEmbeddingModel& m, const Triple& q,
                                  const BaselineOptions& opts = {});

UncertaintyAssessment assess(const GaussianEmbeddingModel& m, const SemanticNormalizer& n,
                             const CoverageMatrix& c, const MixingWeight& w, const Triple& q);

void write_assessments_csv(const std::vector<UncertaintyAssessment>& rows,
                           const std::vector<std::string>& labels, const std::string& path);

}  // namespace cagp
