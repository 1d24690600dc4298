#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cagp/coverage.hpp"
#include "cagp/embed.hpp"
#include "cagp/oodgen.hpp"
#include "cagp/types.hpp"

namespace cagp {

enum class AlphaMode { Fixed, Learned };

// Run configuration. Parsed from a line-based `key = value` file with
// dotted keys (see configs/ for examples); CLI flags override file values.
struct RunConfig {
    // Dataset: either TSV paths or the synthetic generator.
    std::string dataset_train;
    std::string dataset_valid;
    std::string dataset_test;
    bool synthetic = false;
    SynthSpec synth;
    std::uint64_t synth_seed = 7;

    std::string out_dir = "out";

    TrainConfig train;
    double tau_percentile = 0.10;
    std::vector<std::uint64_t> epsilons = {1, 5, 10, 20, 50, 100};
    AlphaMode alpha_mode = AlphaMode::Learned;
    double fixed_alpha = 0.5;
    CoverageMode coverage_mode = CoverageMode::Binary;

    std::uint64_t corruption_seed = 2;
    std::uint64_t bootstrap_seed = 3;
    int bootstrap_iterations = 10000;
    int baseline_draws = 10;

    void set(const std::string& key, const std::string& value);
    std::string to_json() const;
};

RunConfig parse_config_file(const std::string& path);
void apply_overrides(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv);

}  // namespace cagp
