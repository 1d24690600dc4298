#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cagp/coverage.hpp"
#include "cagp/graph.hpp"
#include "cagp/types.hpp"

namespace cagp {

enum class OodClass { InDistribution, Emerging, NovelContext };

std::string to_string(OodClass c);

// Labeled split of evaluation triples. The three lists partition the input:
//   emerging:      min(freq(h), freq(t)) < tau
//   novel_context: min freq >= tau and (c(h,r)=0 or c(t,r)=0)
//   in_distribution: min freq >= tau and both pairs covered
struct OodPartition {
    std::vector<Triple> emerging;
    std::vector<Triple> novel_context;
    std::vector<Triple> in_distribution;
    std::uint64_t tau = 0;

    std::size_t total() const {
        return emerging.size() + novel_context.size() + in_distribution.size();
    }
};

OodClass classify_triple(const KnowledgeGraph& kg, const CoverageMatrix& c, const Triple& q,
                         std::uint64_t tau);

// Classify every triple of the named split. Coverage must come from train.
OodPartition partition(const KnowledgeGraph& kg, const CoverageMatrix& c, const std::string& split,
                       std::uint64_t tau);

// Input-order rows: ids, class label, min endpoint frequency, coverage bits.
void write_partition_csv(const KnowledgeGraph& kg, const CoverageMatrix& c,
                         const std::string& split, std::uint64_t tau, const std::string& path);

struct LabeledTriple {
    Triple triple{};
    bool is_corrupt = false;
};

// One uniform tail corruption per source triple (original tail excluded);
// output holds the source (label ID) followed by its corruption (label OOD).
std::vector<LabeledTriple> random_corruptions(const KnowledgeGraph& kg, const std::string& split,
                                              std::uint64_t seed);

// Fraction of novel triples with a frequency-matched training triple at each
// epsilon: some (h',r',t') in train with endpoint frequencies within eps of
// the query's, compared as unordered pairs. Sorted-pair index, not O(n^2).
std::vector<double> verify_a3(const KnowledgeGraph& kg, const std::vector<Triple>& novel,
                              const std::vector<std::uint64_t>& epsilons);

// Synthetic KG generator for the theorem suites. Core entities receive at
// least `core_rounds` training triples each (so they are unambiguously
// frequent); emerging entities receive one or two. A sampled set of
// (core entity, relation) pairs is held out of training entirely, and novel
// evaluation triples are built by re-relating an existing training triple
// through such a held-out pair, which frequency-matches them to the ID
// evaluation population exactly (A3 at epsilon = 0).
struct SynthSpec {
    std::size_t entities = 200;
    std::size_t relations = 10;
    double skew = 1.2;               // power-law exponent for partner sampling
    double heldout_fraction = 0.10;  // of core-entity x relation pairs
    std::size_t emerging_entities = 20;
    std::size_t core_rounds = 20;       // minimum train occurrences per core entity
    std::size_t extra_train = 1400;     // additional skew-sampled triples
    std::size_t eval_id = 500;
    std::size_t eval_novel = 300;
    std::size_t eval_emerging = 150;
    std::uint64_t tau = 10;
};

struct SyntheticKg {
    KnowledgeGraph kg;  // splits: train + eval
    OodPartition ground_truth;
    static constexpr const char* kEvalSplit = "eval";
};

SyntheticKg synth_theorem_kg(const SynthSpec& spec, std::uint64_t seed);

}  // namespace cagp
