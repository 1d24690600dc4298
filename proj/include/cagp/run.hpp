#pragma once

#include <ostream>
#include <string>

#include "cagp/config.hpp"
#include "cagp/coverage.hpp"
#include "cagp/embed.hpp"
#include "cagp/graph.hpp"
#include "cagp/oodgen.hpp"
#include "cagp/uncertainty.hpp"

namespace cagp {

// Artifact locations under the configured output directory.
struct RunPaths {
    std::string dir;
    std::string config_json;
    std::string stats_json;
    std::string coverage_csv;
    std::string partition_valid_csv;
    std::string partition_test_csv;
    std::string checkpoint;
    std::string curve_csv;

    static RunPaths in(const std::string& out_dir);
    std::string metrics_json(const std::string& mode) const;
    std::string table_csv(const std::string& mode) const;
    std::string selective_csv(const std::string& mode) const;
    std::string assessments_csv(const std::string& mode) const;
    std::string error_analysis_json(const std::string& mode) const;
    std::string verify_json() const;
    std::string verify_txt() const;
    std::string complementarity_csv() const;
    std::string ablate_coverage_csv() const;
    std::string ablate_alpha_csv() const;
    std::string ablate_tau_csv() const;
};

// TSV paths or the synthetic generator; synthetic evaluation triples are
// dealt alternately into valid/test so both carry every OOD class.
KnowledgeGraph load_run_graph(const RunConfig& cfg);

// Commands. Result summaries go to `out` (stdout in the CLI); diagnostics
// are thrown as exceptions or printed to stderr by the caller.
void cmd_prepare(const RunConfig& cfg, std::ostream& out);
void cmd_train(const RunConfig& cfg, std::ostream& out);
void cmd_eval(const RunConfig& cfg, const std::string& mode, std::ostream& out);
void cmd_verify(const RunConfig& cfg, std::ostream& out);
void cmd_ablate(const RunConfig& cfg, std::ostream& out);
void cmd_report(const RunConfig& cfg, std::ostream& out);

}  // namespace cagp
