#include "cagp/run.hpp"

#include "cagp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cagp/eval.hpp"
#include "cagp/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cagp {

RunPaths RunPaths::in(const std::string& out_dir) {
    RunPaths p;
    p.dir = out_dir;
    p.config_json = out_dir + "/config.json";
    p.stats_json = out_dir + "/graph_stats.json";
    p.coverage_csv = out_dir + "/coverage.csv";
    p.partition_valid_csv = out_dir + "/partition_valid.csv";
    p.partition_test_csv = out_dir + "/partition_test.csv";
    p.checkpoint = out_dir + "/model.cagp";
    p.curve_csv = out_dir + "/training_curve.csv";
    return p;
}

std::string RunPaths::metrics_json(const std::string& mode) const {
    return dir + "/metrics_" + mode + ".json";
}
std::string RunPaths::table_csv(const std::string& mode) const {
    return dir + "/table_" + mode + ".csv";
}
std::string RunPaths::selective_csv(const std::string& mode) const {
    return dir + "/selective_" + mode + ".csv";
}
std::string RunPaths::assessments_csv(const std::string& mode) const {
    return dir + "/assessments_" + mode + ".csv";
}
std::string RunPaths::error_analysis_json(const std::string& mode) const {
    return dir + "/error_analysis_" + mode + ".json";
}
std::string RunPaths::verify_json() const { return dir + "/verify_report.json"; }
std::string RunPaths::verify_txt() const { return dir + "/verify_report.txt"; }
std::string RunPaths::complementarity_csv() const { return dir + "/complementarity.csv"; }
std::string RunPaths::ablate_coverage_csv() const { return dir + "/ablate_coverage.csv"; }
std::string RunPaths::ablate_alpha_csv() const { return dir + "/ablate_alpha.csv"; }
std::string RunPaths::ablate_tau_csv() const { return dir + "/ablate_tau.csv"; }

KnowledgeGraph load_run_graph(const RunConfig& cfg) {
    if (cfg.synthetic) {
        SyntheticKg synth = synth_theorem_kg(cfg.synth, cfg.synth_seed);
        KnowledgeGraph kg;
        kg.entity_names = std::move(synth.kg.entity_names);
        kg.relation_names = std::move(synth.kg.relation_names);
        kg.entity_index = std::move(synth.kg.entity_index);
        kg.relation_index = std::move(synth.kg.relation_index);
        kg.splits["train"] = std::move(synth.kg.splits.at("train"));
        const auto& eval = synth.kg.splits.at(SyntheticKg::kEvalSplit);
        auto& valid = kg.splits["valid"];
        auto& test = kg.splits["test"];
        // Hash the index for the valid/test deal: deterministic but free of
        // any periodicity that could lock onto the generator's own
        // alternation patterns.
        for (std::size_t i = 0; i < eval.size(); ++i) {
            bool to_valid = (splitmix64(0x515B ^ static_cast<std::uint64_t>(i)) & 1) == 0;
            (to_valid ? valid : test).push_back(eval[i]);
        }
        recompute_frequencies(kg);
        return kg;
    }
    SplitPaths paths{cfg.dataset_train, cfg.dataset_valid, cfg.dataset_test};
    return load_tsv(paths);
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct EvalPool {
    std::vector<Triple> triples;
    std::vector<bool> is_ood;
};

EvalPool temporal_pool(const KnowledgeGraph& kg, const CoverageMatrix& cov, std::uint64_t tau,
                       const std::string& split) {
    EvalPool pool;
    for (const Triple& t : kg.split(split)) {
        pool.triples.push_back(t);
        pool.is_ood.push_back(classify_triple(kg, cov, t, tau) != OodClass::InDistribution);
    }
    return pool;
}

EvalPool corruption_pool(const KnowledgeGraph& kg, const std::string& split, std::uint64_t seed) {
    EvalPool pool;
    for (const LabeledTriple& lt : random_corruptions(kg, split, seed)) {
        pool.triples.push_back(lt.triple);
        pool.is_ood.push_back(lt.is_corrupt);
    }
    return pool;
}

// Probability mapping per signal family: combined-style scores live in
// [0,2] (p = u/2); the raw score baseline is min-maxed over the pool.
enum class ProbMap { HalfRange, MinMax };

struct SignalValues {
    std::string name;
    std::vector<double> u;
    ProbMap prob_map = ProbMap::HalfRange;
};

std::vector<SignalValues> compute_signals(const EvalPool& pool, const GaussianEmbeddingModel& model,
                                          const SemanticNormalizer& norm, const CoverageMatrix& cov,
                                          const MixingWeight& learned, double fixed_alpha,
                                          const RunConfig& cfg) {
    MixingWeight fixed = MixingWeight::from_alpha(fixed_alpha);
    std::vector<SignalValues> signals(5);
    signals[0] = {"semantic", {}, ProbMap::HalfRange};
    signals[1] = {"structural", {}, ProbMap::HalfRange};
    signals[2] = {"fixed_0.5", {}, ProbMap::HalfRange};
    signals[3] = {"cagp", {}, ProbMap::HalfRange};
    signals[4] = {"score_baseline", {}, ProbMap::MinMax};
    BaselineOptions bopt;
    bopt.draws = cfg.baseline_draws;
    bopt.seed = cfg.bootstrap_seed;  // independent of train/corruption streams
    for (const Triple& t : pool.triples) {
        double sem = norm.normalize(semantic_uncertainty(model, t));
        double str = static_cast<double>(structural_uncertainty(cov, t));
        signals[0].u.push_back(sem);
        signals[1].u.push_back(str);
        signals[2].u.push_back(combine_cagp(fixed, sem, str));
        signals[3].u.push_back(combine_cagp(learned, sem, str));
        signals[4].u.push_back(baseline_score_uncertainty(model, t, bopt));
    }
    return signals;
}

nlohmann::ordered_json metric_row(const std::string& metric, const std::string& split,
                                  const std::string& signal, std::uint64_t seed) {
    return {{"metric", metric}, {"value", nullptr}, {"split", split}, {"signal", signal}, {"seed", seed}};
}

}  // namespace

void cmd_prepare(const RunConfig& cfg, std::ostream& out) {
    fs::create_directories(cfg.out_dir);
    RunPaths paths = RunPaths::in(cfg.out_dir);
    KnowledgeGraph kg = load_run_graph(cfg);
    CoverageMatrix cov = build_coverage(kg);
    std::uint64_t tau = frequency_threshold(kg, cfg.tau_percentile);

    {
        std::ofstream f(paths.config_json, std::ios::binary);
        f << cfg.to_json() << '\n';
    }
    {
        std::ofstream f(paths.stats_json, std::ios::binary);
        f << graph_stats(kg).to_json() << '\n';
    }
    write_coverage_csv(cov, paths.coverage_csv);
    if (kg.has_split("valid")) {
        write_partition_csv(kg, cov, "valid", tau, paths.partition_valid_csv);
    }
    if (kg.has_split("test")) {
        write_partition_csv(kg, cov, "test", tau, paths.partition_test_csv);
    }

    out << "prepared " << cfg.out_dir << ": " << kg.entity_count() << " entities, "
        << kg.relation_count() << " relations, " << kg.split("train").size()
        << " train triples, tau=" << tau << " (p" << cfg.tau_percentile * 100 << ")\n";
    if (kg.has_split("test")) {
        OodPartition p = partition(kg, cov, "test", tau);
        out << "test partition: emerging=" << p.emerging.size()
            << " novel=" << p.novel_context.size() << " id=" << p.in_distribution.size() << "\n";
    }
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    fs::create_directories(cfg.out_dir);
    RunPaths paths = RunPaths::in(cfg.out_dir);
    KnowledgeGraph kg = load_run_graph(cfg);
    TrainLog log;
    GaussianEmbeddingModel model = train(kg, cfg.train, &log);
    save_checkpoint(model, cfg.train, kg, paths.checkpoint);
    {
        std::ofstream f(paths.curve_csv, std::ios::binary);
        f << "epoch,mean_loss\n";
        for (std::size_t i = 0; i < log.epoch_mean_loss.size(); ++i) {
            f << i << ',' << fmt17(log.epoch_mean_loss[i]) << '\n';
        }
    }
    out << "trained " << to_string(cfg.train.scorer) << " d=" << cfg.train.dim << " for "
        << cfg.train.epochs << " epochs; checkpoint at " << paths.checkpoint << "\n";
    if (!log.epoch_mean_loss.empty()) {
        out << "final mean loss " << log.epoch_mean_loss.back() << "\n";
    }
}

void cmd_eval(const RunConfig& cfg, const std::string& mode, std::ostream& out) {
    if (mode != "temporal_like" && mode != "random_corruption") {
        throw InvalidInput("eval mode must be temporal_like or random_corruption");
    }
    RunPaths paths = RunPaths::in(cfg.out_dir);
    if (!fs::exists(paths.checkpoint)) {
        throw InvalidInput("missing checkpoint " + paths.checkpoint + " (run train first)");
    }
    KnowledgeGraph kg = load_run_graph(cfg);
    CoverageMatrix cov = build_coverage(kg);
    std::uint64_t tau = frequency_threshold(kg, cfg.tau_percentile);
    GaussianEmbeddingModel model = load_checkpoint(paths.checkpoint);
    if (model.entity_count != kg.entity_count() || model.relation_count != kg.relation_count()) {
        throw InvalidInput("checkpoint does not match the dataset vocabulary");
    }
    SemanticNormalizer norm = fit_normalizer(model, kg);

    // Mixing weight: fit on the validation split of the matching mode; the
    // test split never enters the fit.
    MixingWeight learned = MixingWeight::from_alpha(cfg.fixed_alpha);
    if (cfg.alpha_mode == AlphaMode::Learned) {
        if (!kg.has_split("valid") || kg.split("valid").empty()) {
            throw InvalidInput("learned alpha requires a validation split");
        }
        EvalPool val = mode == "temporal_like"
                           ? temporal_pool(kg, cov, tau, "valid")
                           : corruption_pool(kg, "valid", cfg.corruption_seed);
        std::vector<ValidationPoint> points;
        points.reserve(val.triples.size());
        for (std::size_t i = 0; i < val.triples.size(); ++i) {
            const Triple& t = val.triples[i];
            points.push_back({norm.normalize(semantic_uncertainty(model, t)),
                              static_cast<double>(structural_uncertainty(cov, t)),
                              static_cast<bool>(val.is_ood[i])});
        }
        try {
            learned = fit_alpha(points);
        } catch (const InvalidInput& e) {
            // single-class validation pool: keep the fixed weight
            out << "warning: cannot fit alpha (" << e.what() << "); using fixed "
                << cfg.fixed_alpha << "\n";
        }
    }

    EvalPool pool = mode == "temporal_like" ? temporal_pool(kg, cov, tau, "test")
                                            : corruption_pool(kg, "test", cfg.corruption_seed);
    std::size_t n_ood = 0;
    for (bool b : pool.is_ood) n_ood += b ? 1 : 0;

    std::vector<SignalValues> signals =
        compute_signals(pool, model, norm, cov, learned, cfg.fixed_alpha, cfg);

    nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
    std::ofstream table(paths.table_csv(mode), std::ios::binary);
    table << "signal,auroc,aupr,f1_at_0.5,ece,brier,acc_at_0.85\n";
    std::ofstream selective(paths.selective_csv(mode), std::ios::binary);
    selective << "signal,answer_rate,accuracy\n";

    bool warned = false;
    for (const SignalValues& sig : signals) {
        std::vector<ScoredSample> samples(pool.triples.size());
        std::vector<double> probs = sig.prob_map == ProbMap::HalfRange ? probs_from_combined(sig.u)
                                                                       : probs_minmax(sig.u);
        std::vector<double> norm01 = probs_minmax(sig.u);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i].uncertainty = sig.u[i];
            samples[i].is_ood = pool.is_ood[i];
            samples[i].correct = (norm01[i] >= 0.5) == static_cast<bool>(pool.is_ood[i]);
        }
        auto emit = [&](const std::string& name, auto&& compute) -> std::optional<double> {
            nlohmann::ordered_json row = metric_row(name, mode, sig.name, cfg.train.seed);
            std::optional<double> value;
            try {
                value = compute();
                row["value"] = *value;
            } catch (const UndefinedMetric& e) {
                row["note"] = std::string("undefined-metric: ") + e.what();
                if (!warned) {
                    out << "warning: undefined metric (" << e.what() << ")\n";
                    warned = true;
                }
            }
            metrics.push_back(row);
            return value;
        };
        auto a = emit("auroc", [&] { return auroc(samples); });
        auto pr = emit("aupr", [&] { return aupr(samples); });
        auto f1 = emit("f1_at_0.5", [&] { return f1_at(samples, 0.5); });
        auto e = emit("ece", [&] { return ece(probs, pool.is_ood); });
        auto b = emit("brier", [&] { return brier(probs, pool.is_ood); });
        auto sel = emit("acc_at_0.85", [&] { return selective_prediction(samples, 0.85); });
        table << sig.name;
        for (const auto& v : {a, pr, f1, e, b, sel}) {
            table << ',' << (v.has_value() ? fmt17(*v) : "");
        }
        table << '\n';
        for (int pct = 50; pct <= 100; pct += 5) {
            double rate = pct / 100.0;
            try {
                double acc = selective_prediction(samples, rate);
                selective << sig.name << ',' << fmt17(rate) << ',' << fmt17(acc) << '\n';
            } catch (const UndefinedMetric&) {
            }
        }
    }

    // Paired significance of CAGP against the single signals.
    if (n_ood > 0 && n_ood < pool.triples.size()) {
        for (const char* other : {"semantic", "structural"}) {
            const SignalValues* a = nullptr;
            const SignalValues* b = nullptr;
            for (const SignalValues& s : signals) {
                if (s.name == "cagp") a = &s;
                if (s.name == other) b = &s;
            }
            double p = paired_bootstrap(a->u, b->u, pool.is_ood, cfg.bootstrap_iterations,
                                        cfg.bootstrap_seed);
            nlohmann::ordered_json row = metric_row(std::string("bootstrap_p_cagp_le_") + other,
                                                    mode, "cagp", cfg.bootstrap_seed);
            row["value"] = p;
            metrics.push_back(row);
        }
    }

    // Error analysis at the balanced 0.5 threshold on the combined signal.
    {
        const SignalValues& cagp_sig = signals[3];
        std::vector<ScoredSample> samples(pool.triples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i] = {cagp_sig.u[i], static_cast<bool>(pool.is_ood[i]), std::nullopt};
        }
        ErrorAnalysis ea = error_analysis(samples, pool.triples, kg, 0.5);
        std::ofstream f(paths.error_analysis_json(mode), std::ios::binary);
        f << ea.to_json() << '\n';
    }

    // Assessments for inspection.
    {
        std::vector<UncertaintyAssessment> rows;
        std::vector<std::string> labels;
        rows.reserve(pool.triples.size());
        for (std::size_t i = 0; i < pool.triples.size(); ++i) {
            rows.push_back(assess(model, norm, cov, learned, pool.triples[i]));
            labels.push_back(pool.is_ood[i] ? "ood" : "id");
        }
        write_assessments_csv(rows, labels, paths.assessments_csv(mode));
    }

    {
        std::ofstream f(paths.metrics_json(mode), std::ios::binary);
        nlohmann::ordered_json doc;
        doc["mode"] = mode;
        doc["alpha"] = learned.alpha();
        doc["tau"] = tau;
        doc["pool_size"] = pool.triples.size();
        doc["ood_count"] = n_ood;
        doc["metrics"] = metrics;
        f << doc.dump(2) << '\n';
    }

    out << "eval " << mode << ": pool=" << pool.triples.size() << " ood=" << n_ood
        << " alpha=" << learned.alpha() << "\n";
    for (const auto& row : metrics) {
        if (row["metric"] == "auroc" && !row["value"].is_null()) {
            out << "  auroc[" << row["signal"].get<std::string>()
                << "] = " << row["value"].get<double>() << "\n";
        }
    }
}

void cmd_verify(const RunConfig& cfg, std::ostream& out) {
    RunPaths paths = RunPaths::in(cfg.out_dir);
    if (!fs::exists(paths.checkpoint)) {
        throw InvalidInput("missing checkpoint " + paths.checkpoint + " (run train first)");
    }
    KnowledgeGraph kg = load_run_graph(cfg);
    CoverageMatrix cov = build_coverage(kg);
    std::uint64_t tau = frequency_threshold(kg, cfg.tau_percentile);
    GaussianEmbeddingModel model = load_checkpoint(paths.checkpoint);
    SemanticNormalizer norm = fit_normalizer(model, kg);
    OodPartition part = partition(kg, cov, "test", tau);

    AssumptionReport report = assumption_report(kg, cov, model, norm, part, cfg.epsilons);

    MixingWeight learned = MixingWeight::from_alpha(cfg.fixed_alpha);
    if (cfg.alpha_mode == AlphaMode::Learned && kg.has_split("valid") &&
        !kg.split("valid").empty()) {
        OodPartition val = partition(kg, cov, "valid", tau);
        std::vector<ValidationPoint> points;
        auto push = [&](const std::vector<Triple>& ts, bool ood) {
            for (const Triple& t : ts) {
                points.push_back({norm.normalize(semantic_uncertainty(model, t)),
                                  static_cast<double>(structural_uncertainty(cov, t)), ood});
            }
        };
        push(val.in_distribution, false);
        push(val.emerging, true);
        push(val.novel_context, true);
        if (!points.empty()) learned = fit_alpha(points);
    }
    ComplementarityTable table = complementarity_table(model, norm, cov, learned, part);

    {
        std::ofstream f(paths.verify_json(), std::ios::binary);
        nlohmann::ordered_json doc;
        doc["tau"] = tau;
        doc["partition"] = {{"emerging", part.emerging.size()},
                            {"novel_context", part.novel_context.size()},
                            {"in_distribution", part.in_distribution.size()}};
        doc["assumptions"] = nlohmann::ordered_json::parse(report.to_json());
        doc["complementarity"] = nlohmann::ordered_json::parse(table.to_json());
        f << doc.dump(2) << '\n';
    }
    {
        std::ofstream f(paths.verify_txt(), std::ios::binary);
        f << report.to_text() << '\n' << table.to_text();
    }
    table.write_csv(paths.complementarity_csv());

    out << report.to_text() << '\n' << table.to_text();
}

void cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    fs::create_directories(cfg.out_dir);
    RunPaths paths = RunPaths::in(cfg.out_dir);
    KnowledgeGraph kg = load_run_graph(cfg);
    CoverageMatrix cov = build_coverage(kg);
    std::uint64_t tau = frequency_threshold(kg, cfg.tau_percentile);
    OodPartition part = partition(kg, cov, "test", tau);

    // Coverage-mode ablation on the novel-context stratum, where binary
    // coverage separates perfectly by construction. Training-free.
    {
        std::ofstream f(paths.ablate_coverage_csv(), std::ios::binary);
        f << "coverage_mode,auroc,aupr\n";
        out << "coverage ablation (novel vs id):\n";
        for (CoverageMode mode :
             {CoverageMode::Binary, CoverageMode::LogScaled, CoverageMode::TfIdf}) {
            std::vector<ScoredSample> samples;
            for (const Triple& t : part.in_distribution) {
                samples.push_back({continuous_coverage(cov, t, mode), false, std::nullopt});
            }
            for (const Triple& t : part.novel_context) {
                samples.push_back({continuous_coverage(cov, t, mode), true, std::nullopt});
            }
            std::string a = "", pr = "";
            try {
                a = fmt17(auroc(samples));
                pr = fmt17(aupr(samples));
            } catch (const UndefinedMetric& e) {
                out << "warning: " << e.what() << "\n";
            }
            f << to_string(mode) << ',' << a << ',' << pr << '\n';
            out << "  " << to_string(mode) << ": auroc=" << a << "\n";
        }
    }

    if (!fs::exists(paths.checkpoint)) {
        throw InvalidInput("missing checkpoint " + paths.checkpoint +
                           " (alpha/tau ablations need a trained model)");
    }
    GaussianEmbeddingModel model = load_checkpoint(paths.checkpoint);
    SemanticNormalizer norm = fit_normalizer(model, kg);

    auto fit_on_valid = [&](std::uint64_t tau_value) {
        OodPartition val = partition(kg, cov, "valid", tau_value);
        std::vector<ValidationPoint> points;
        auto push = [&](const std::vector<Triple>& ts, bool ood) {
            for (const Triple& t : ts) {
                points.push_back({norm.normalize(semantic_uncertainty(model, t)),
                                  static_cast<double>(structural_uncertainty(cov, t)), ood});
            }
        };
        push(val.in_distribution, false);
        push(val.emerging, true);
        push(val.novel_context, true);
        return fit_alpha(points);
    };
    auto cagp_auroc = [&](const OodPartition& p, const MixingWeight& w) {
        std::vector<ScoredSample> samples;
        auto push = [&](const std::vector<Triple>& ts, bool ood) {
            for (const Triple& t : ts) {
                double sem = norm.normalize(semantic_uncertainty(model, t));
                double str = static_cast<double>(structural_uncertainty(cov, t));
                samples.push_back({combine_cagp(w, sem, str), ood, std::nullopt});
            }
        };
        push(p.in_distribution, false);
        push(p.emerging, true);
        push(p.novel_context, true);
        return auroc(samples);
    };

    // Mixing ablation: fixed 0.5 vs learned alpha on the temporal pool.
    {
        MixingWeight fixed = MixingWeight::from_alpha(cfg.fixed_alpha);
        MixingWeight learned = fit_on_valid(tau);
        std::ofstream f(paths.ablate_alpha_csv(), std::ios::binary);
        f << "alpha_mode,alpha,auroc\n";
        f << "fixed," << fmt17(fixed.alpha()) << ',' << fmt17(cagp_auroc(part, fixed)) << '\n';
        f << "learned," << fmt17(learned.alpha()) << ',' << fmt17(cagp_auroc(part, learned)) << '\n';
        out << "alpha ablation: fixed(" << fixed.alpha() << ")=" << cagp_auroc(part, fixed)
            << " learned(" << learned.alpha() << ")=" << cagp_auroc(part, learned) << "\n";
    }

    // Tau sensitivity sweep.
    {
        std::ofstream f(paths.ablate_tau_csv(), std::ios::binary);
        f << "tau_percentile,tau,cagp_auroc\n";
        out << "tau sweep:\n";
        for (double pct : {0.05, 0.10, 0.20, 0.30}) {
            std::uint64_t tau_p = frequency_threshold(kg, pct);
            OodPartition p = partition(kg, cov, "test", tau_p);
            MixingWeight w = fit_on_valid(tau_p);
            double a = cagp_auroc(p, w);
            f << fmt17(pct) << ',' << tau_p << ',' << fmt17(a) << '\n';
            out << "  p" << pct * 100 << " (tau=" << tau_p << "): cagp auroc=" << a << "\n";
        }
    }
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
    RunPaths paths = RunPaths::in(cfg.out_dir);
    bool found = false;
    auto dump_file = [&](const std::string& path, const std::string& title) {
        std::ifstream f(path, std::ios::binary);
        if (!f) return;
        found = true;
        out << "== " << title << " (" << path << ")\n";
        out << f.rdbuf() << "\n";
    };
    dump_file(paths.stats_json, "graph stats");
    for (const char* mode : {"temporal_like", "random_corruption"}) {
        dump_file(paths.metrics_json(mode), std::string("metrics ") + mode);
    }
    dump_file(paths.verify_txt(), "assumption report");
    dump_file(paths.ablate_coverage_csv(), "coverage ablation");
    dump_file(paths.ablate_alpha_csv(), "alpha ablation");
    dump_file(paths.ablate_tau_csv(), "tau sensitivity");
    if (!found) {
        throw InvalidInput("no artifacts found under " + cfg.out_dir + " (run the pipeline first)");
    }
}

}  // namespace cagp
