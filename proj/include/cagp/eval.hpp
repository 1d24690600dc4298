#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cagp/coverage.hpp"
#include "cagp/graph.hpp"
#include "cagp/types.hpp"

namespace cagp {

struct ScoredSample {
    double uncertainty = 0.0;
    bool is_ood = false;
    std::optional<bool> correct;  // required by selective_prediction
};

// Probability a uniformly random OOD sample outranks a random ID sample,
// ties credited 0.5 (Mann-Whitney). O(n log n) rank-sum; throws
// UndefinedMetric when one class is empty.
double auroc(const std::vector<ScoredSample>& samples);

// Step integration of precision over recall with OOD as the positive class;
// tied scores are collapsed into a single threshold step.
double aupr(const std::vector<ScoredSample>& samples);

// F1 with decisions at `threshold` applied to min-max-normalized scores
// (all-equal inputs normalize to 0.5). Predict OOD when normalized >= t.
double f1_at(const std::vector<ScoredSample>& samples, double threshold = 0.5);

// Calibration metrics take explicit OOD-probabilities in [0,1].
// Combined CAGP-style scores in [0,2] map via p = u/2; raw signals via
// min-max over the evaluation pool.
std::vector<double> probs_from_combined(const std::vector<double>& uncertainties);
std::vector<double> probs_minmax(const std::vector<double>& uncertainties);

double ece(const std::vector<double>& probabilities, const std::vector<bool>& is_ood, int bins = 15);
double brier(const std::vector<double>& probabilities, const std::vector<bool>& is_ood);

// Abstain on the ceil((1-rate)*n) highest-uncertainty samples (ties broken
// by stable input order) and return accuracy over the answered rest.
double selective_prediction(const std::vector<ScoredSample>& samples, double answer_rate);

// Paired bootstrap over aligned uncertainty lists. Resample scheme is pinned
// for reproducibility: iteration i draws n indices as rng() % n from a
// single mt19937_64(seed) stream. Returns the mid-p value
//   p = [#(AUROC_a < AUROC_b) + 0.5 * #(AUROC_a == AUROC_b)] / iterations,
// counting single-class resamples as ties.
double paired_bootstrap(const std::vector<double>& unc_a, const std::vector<double>& unc_b,
                        const std::vector<bool>& is_ood, int iterations = 10000,
                        std::uint64_t seed = 0);

struct ErrorClassStats {
    std::size_t count = 0;
    double rate = 0.0;              // vs the class total (FP rate over ID, FN over OOD)
    double mean_tail_degree = 0.0;  // training frequency of the tail entity
    double mean_relation_freq = 0.0;
};

struct ErrorAnalysis {
    ErrorClassStats false_positives;
    ErrorClassStats false_negatives;
    ErrorClassStats true_negatives;  // correctly kept ID
    ErrorClassStats true_positives;  // correctly flagged OOD
    double accuracy = 0.0;
    std::string to_json() const;
};

// Binary decisions at `threshold` on min-max-normalized uncertainty;
// degree/frequency statistics come from the training split.
ErrorAnalysis error_analysis(const std::vector<ScoredSample>& samples,
                             const std::vector<Triple>& triples, const KnowledgeGraph& kg,
                             double threshold = 0.5);

}  // namespace cagp
