// Acceptance suite. Each criterion prints one PASS/FAIL/SKIP line; the
// process exits 0 when every executed criterion passed, 1 on any failure,
// and 77 when everything in the requested subset was skipped (missing
// dataset), which CTest reports as "skipped".
//
// Criteria 1-5 and 9 run against FB15k-237 TSV files located at
// $CAGP_FB15K237_DIR or <source>/data/fb15k-237/{train,valid,test}.txt.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cagp/config.hpp"
#include "cagp/eval.hpp"
#include "cagp/oodgen.hpp"
#include "cagp/rng.hpp"
#include "cagp/run.hpp"
#include "cagp/uncertainty.hpp"
#include "cagp/verify.hpp"

using namespace cagp;
namespace fs = std::filesystem;

#ifndef CAGP_SOURCE_DIR
#define CAGP_SOURCE_DIR "."
#endif

namespace {

int g_pass = 0, g_fail = 0, g_skip = 0;

void report(int id, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << detail << "\n";
    (ok ? g_pass : g_fail) += 1;
}

void skip(int id, const std::string& why) {
    std::cout << "[SKIP] criterion " << id << ": " << why << "\n";
    g_skip += 1;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string fb15k_dir() {
    if (const char* env = std::getenv("CAGP_FB15K237_DIR")) return env;
    return std::string(CAGP_SOURCE_DIR) + "/data/fb15k-237";
}

bool fb15k_available(std::string& why) {
    std::string dir = fb15k_dir();
    for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
        if (!fs::exists(dir + "/" + f)) {
            why = "FB15k-237 not found (" + dir + "/" + f +
                  " missing; set CAGP_FB15K237_DIR or place the TSV splits there)";
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- shared

struct Fb15kContext {
    KnowledgeGraph kg;
    CoverageMatrix cov;
    std::uint64_t tau = 0;
    OodPartition test_part;
    double load_seconds = 0.0;
};

Fb15kContext& fb15k_context() {
    static Fb15kContext ctx = [] {
        Timer t;
        Fb15kContext c;
        std::string dir = fb15k_dir();
        c.kg = load_tsv({dir + "/train.txt", dir + "/valid.txt", dir + "/test.txt"});
        c.cov = build_coverage(c.kg);
        c.tau = frequency_threshold(c.kg, 0.10);
        c.test_part = partition(c.kg, c.cov, "test", c.tau);
        c.load_seconds = t.seconds();
        return c;
    }();
    return ctx;
}

double stratum_auroc(const std::vector<double>& ood_u, const std::vector<double>& id_u) {
    std::vector<ScoredSample> s;
    for (double u : id_u) s.push_back({u, false, std::nullopt});
    for (double u : ood_u) s.push_back({u, true, std::nullopt});
    return auroc(s);
}

// ------------------------------------------------------------- criteria

void criterion_1() {
    std::string why;
    if (!fb15k_available(why)) return skip(1, why);
    Timer t;
    Fb15kContext& c = fb15k_context();
    std::vector<double> id_u, ood_u;
    for (const Triple& q : c.test_part.in_distribution) {
        id_u.push_back(static_cast<double>(structural_uncertainty(c.cov, q)));
    }
    for (const Triple& q : c.test_part.novel_context) {
        ood_u.push_back(static_cast<double>(structural_uncertainty(c.cov, q)));
    }
    double a = stratum_auroc(ood_u, id_u);
    double secs = t.seconds() + c.load_seconds;
    bool ok = (a == 1.0) && secs < 60.0;
    std::ostringstream d;
    d << "binary-coverage structural AUROC on novel contexts = " << a << " (need exactly 1.0), "
      << secs << "s (need < 60s)";
    report(1, ok, d.str());
}

void criterion_2() {
    std::string why;
    if (!fb15k_available(why)) return skip(2, why);
    Timer t;
    Fb15kContext& c = fb15k_context();
    std::vector<std::uint64_t> eps = {1, 5, 10, 20, 50, 100};
    std::vector<double> fr = verify_a3(c.kg, c.test_part.novel_context, eps);
    bool ok = true;
    std::ostringstream d;
    d << "A3 matched fraction:";
    for (std::size_t i = 0; i < eps.size(); ++i) {
        d << " eps=" << eps[i] << ":" << fr[i] * 100.0 << "%";
        if (fr[i] != 1.0) ok = false;
    }
    double secs = t.seconds();
    d << " (need 100% everywhere), " << secs << "s (need < 30s)";
    report(2, ok && secs < 30.0, d.str());
}

void criterion_3() {
    std::string why;
    if (!fb15k_available(why)) return skip(3, why);
    Fb15kContext& c = fb15k_context();
    auto within = [](std::size_t got, double want) {
        return std::abs(static_cast<double>(got) - want) <= 0.02 * want;
    };
    bool ok = within(c.test_part.emerging.size(), 2223.0) &&
              within(c.test_part.novel_context.size(), 5193.0) &&
              within(c.test_part.in_distribution.size(), 13050.0);
    std::ostringstream d;
    d << "test partition emerging/novel/id = " << c.test_part.emerging.size() << "/"
      << c.test_part.novel_context.size() << "/" << c.test_part.in_distribution.size()
      << " (need within 2% of 2223/5193/13050, tau=" << c.tau << ")";
    report(3, ok, d.str());
}

void criterion_4() {
    std::string why;
    if (!fb15k_available(why)) return skip(4, why);
    Fb15kContext& c = fb15k_context();
    auto mode_auroc = [&](CoverageMode mode) {
        std::vector<double> id_u, ood_u;
        for (const Triple& q : c.test_part.in_distribution) {
            id_u.push_back(continuous_coverage(c.cov, q, mode));
        }
        for (const Triple& q : c.test_part.novel_context) {
            ood_u.push_back(continuous_coverage(c.cov, q, mode));
        }
        return stratum_auroc(ood_u, id_u);
    };
    double log_a = mode_auroc(CoverageMode::LogScaled);
    double tfidf_a = mode_auroc(CoverageMode::TfIdf);
    bool ok = log_a >= 0.54 && log_a <= 0.66 && tfidf_a >= 0.50 && tfidf_a <= 0.63;
    std::ostringstream d;
    d << "continuous-coverage AUROC: log_scaled=" << log_a << " (need [0.54,0.66]), tfidf="
      << tfidf_a << " (need [0.50,0.63])";
    report(4, ok, d.str());
}

// Criteria 5 and 9 share one trained model (the extended run).
struct TrainedFb15k {
    bool available = false;
    GaussianEmbeddingModel model;
    SemanticNormalizer norm;
};

TrainedFb15k& trained_fb15k() {
    static TrainedFb15k t = [] {
        TrainedFb15k out;
        Fb15kContext& c = fb15k_context();
        TrainConfig cfg;  // spec defaults: d=100, batch 2048, lr 1e-3, beta 0.01,
                          // 50 epochs, 32 negatives, DistMult, seed 1
        std::string cache = "acceptance_out/fb15k_model.cagp";
        if (fs::exists(cache)) {
            std::cerr << "(reusing cached checkpoint " << cache << ")\n";
            out.model = load_checkpoint(cache);
        } else {
            Timer timer;
            out.model = train(c.kg, cfg);
            std::cerr << "(trained FB15k-237 defaults in " << timer.seconds() << "s)\n";
            fs::create_directories("acceptance_out");
            save_checkpoint(out.model, cfg, c.kg, cache);
        }
        out.norm = fit_normalizer(out.model, c.kg);
        out.available = true;
        return out;
    }();
    return t;
}

MixingWeight fit_alpha_on_valid(const Fb15kContext& c, const TrainedFb15k& t, std::uint64_t tau) {
    OodPartition val = partition(c.kg, c.cov, "valid", tau);
    std::vector<ValidationPoint> points;
    auto push = [&](const std::vector<Triple>& ts, bool ood) {
        for (const Triple& q : ts) {
            points.push_back({t.norm.normalize(semantic_uncertainty(t.model, q)),
                              static_cast<double>(structural_uncertainty(c.cov, q)), ood});
        }
    };
    push(val.in_distribution, false);
    push(val.emerging, true);
    push(val.novel_context, true);
    return fit_alpha(points);
}

double cagp_auroc_at_tau(const Fb15kContext& c, const TrainedFb15k& t, std::uint64_t tau) {
    MixingWeight w = fit_alpha_on_valid(c, t, tau);
    OodPartition p = partition(c.kg, c.cov, "test", tau);
    std::vector<ScoredSample> samples;
    auto push = [&](const std::vector<Triple>& ts, bool ood) {
        for (const Triple& q : ts) {
            double sem = t.norm.normalize(semantic_uncertainty(t.model, q));
            double str = static_cast<double>(structural_uncertainty(c.cov, q));
            samples.push_back({combine_cagp(w, sem, str), ood, std::nullopt});
        }
    };
    push(p.in_distribution, false);
    push(p.emerging, true);
    push(p.novel_context, true);
    return auroc(samples);
}

void criterion_5() {
    std::string why;
    if (!fb15k_available(why)) return skip(5, why);
    if (std::getenv("CAGP_SKIP_TRAINED")) {
        return skip(5, "extended trained-model run disabled via CAGP_SKIP_TRAINED");
    }
    Fb15kContext& c = fb15k_context();
    TrainedFb15k& t = trained_fb15k();

    // Semantic-only AUROC on the temporal-like pool (all OOD vs ID).
    std::vector<double> id_u, ood_u;
    for (const Triple& q : c.test_part.in_distribution) {
        id_u.push_back(t.norm.normalize(semantic_uncertainty(t.model, q)));
    }
    for (const Triple& q : c.test_part.emerging) {
        ood_u.push_back(t.norm.normalize(semantic_uncertainty(t.model, q)));
    }
    for (const Triple& q : c.test_part.novel_context) {
        ood_u.push_back(t.norm.normalize(semantic_uncertainty(t.model, q)));
    }
    double sem_auroc = stratum_auroc(ood_u, id_u);
    double cagp = cagp_auroc_at_tau(c, t, c.tau);
    bool ok = sem_auroc >= 0.49 && sem_auroc <= 0.60 && cagp >= 0.93;
    std::ostringstream d;
    d << "trained defaults: semantic AUROC=" << sem_auroc << " (need [0.49,0.60]), CAGP learned="
      << cagp << " (need >= 0.93)";
    report(5, ok, d.str());
}

void criterion_6() {
    Timer t;
    SynthSpec spec;  // defaults: 200 entities, 10 relations
    SyntheticKg synth = synth_theorem_kg(spec, 42);
    CoverageMatrix cov = build_coverage(synth.kg);

    // Variances forced to a fixed decreasing function of frequency.
    TrainConfig mc;
    mc.dim = 1;
    GaussianEmbeddingModel model = init_model(synth.kg.entity_count(), synth.kg.relation_count(), mc);
    for (EntityId e = 0; e < synth.kg.entity_count(); ++e) {
        model.ell[e] = std::log(1.0 / (1.0 + static_cast<double>(synth.kg.freq[e])));
    }
    SemanticNormalizer norm = fit_normalizer(model, synth.kg);

    auto sem = [&](const Triple& q) { return norm.normalize(semantic_uncertainty(model, q)); };
    auto str = [&](const Triple& q) { return static_cast<double>(structural_uncertainty(cov, q)); };

    std::vector<double> id_str, novel_str, id_sem, novel_sem;
    for (const Triple& q : synth.ground_truth.in_distribution) {
        id_str.push_back(str(q));
        id_sem.push_back(sem(q));
    }
    for (const Triple& q : synth.ground_truth.novel_context) {
        novel_str.push_back(str(q));
        novel_sem.push_back(sem(q));
    }
    double a_str_novel = stratum_auroc(novel_str, id_str);
    double a_sem_novel = stratum_auroc(novel_sem, id_sem);

    // Grid-optimal CAGP vs single signals on the full (both-type) pool.
    std::vector<ValidationPoint> points;
    std::vector<ScoredSample> sem_pool, str_pool;
    auto push = [&](const std::vector<Triple>& ts, bool ood) {
        for (const Triple& q : ts) {
            points.push_back({sem(q), str(q), ood});
            sem_pool.push_back({sem(q), ood, std::nullopt});
            str_pool.push_back({str(q), ood, std::nullopt});
        }
    };
    push(synth.ground_truth.in_distribution, false);
    push(synth.ground_truth.emerging, true);
    push(synth.ground_truth.novel_context, true);
    MixingWeight w = fit_alpha(points);
    std::vector<ScoredSample> cagp_pool;
    for (const ValidationPoint& p : points) {
        cagp_pool.push_back({combine_cagp(w, p.u_sem_norm, p.u_str), p.is_ood, std::nullopt});
    }
    double a_sem = auroc(sem_pool), a_str = auroc(str_pool), a_cagp = auroc(cagp_pool);
    double best_single = std::max(a_sem, a_str);
    double secs = t.seconds();

    bool ok = a_str_novel == 1.0 && a_sem_novel >= 0.45 && a_sem_novel <= 0.55 &&
              a_cagp >= best_single + 0.02 && secs < 10.0;
    std::ostringstream d;
    d << "synthetic fixture: structural-on-novel=" << a_str_novel
      << " (need exactly 1.0), semantic-on-novel=" << a_sem_novel
      << " (need [0.45,0.55]), cagp=" << a_cagp << " vs best single " << best_single
      << " (need margin >= 0.02), " << secs << "s (need < 10s)";
    report(6, ok, d.str());
}

void criterion_7() {
    // auroc against the O(n^2) oracle on 1000 random tied instances.
    std::mt19937_64 rng(20240001);
    int mismatches = 0;
    int tested = 0;
    while (tested < 1000) {
        std::size_t n = 2 + rng() % 49;
        std::vector<ScoredSample> samples;
        bool any_ood = false, any_id = false;
        for (std::size_t i = 0; i < n; ++i) {
            double u = static_cast<double>(rng() % 10) / 5.0;
            bool ood = (rng() % 2) == 0;
            (ood ? any_ood : any_id) = true;
            samples.push_back({u, ood, std::nullopt});
        }
        if (!any_ood || !any_id) continue;
        ++tested;
        double wins = 0.0;
        std::size_t pairs = 0;
        for (const auto& o : samples) {
            if (!o.is_ood) continue;
            for (const auto& i : samples) {
                if (i.is_ood) continue;
                ++pairs;
                if (o.uncertainty > i.uncertainty) wins += 1.0;
                else if (o.uncertainty == i.uncertainty) wins += 0.5;
            }
        }
        double oracle = wins / static_cast<double>(pairs);
        if (auroc(samples) != oracle) ++mismatches;
    }

    // selective_prediction at rate 1.0 equals base accuracy exactly.
    int sel_mismatches = 0;
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t n = 1 + rng() % 40;
        std::vector<ScoredSample> samples;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool ok = (rng() % 3) != 0;
            correct += ok ? 1 : 0;
            samples.push_back({static_cast<double>(rng() % 7), false, ok});
        }
        double base = static_cast<double>(correct) / static_cast<double>(n);
        if (selective_prediction(samples, 1.0) != base) ++sel_mismatches;
    }

    // ECE against the hand-worked 6-sample fixture to 1e-12.
    std::vector<double> p = {0.125, 0.25, 0.375, 0.625, 0.75, 0.875};
    std::vector<bool> y = {false, false, true, true, true, false};
    double ece_err = std::abs(ece(p, y, 2) - 1.0 / 12.0);

    bool ok = mismatches == 0 && sel_mismatches == 0 && ece_err < 1e-12;
    std::ostringstream d;
    d << "auroc oracle mismatches=" << mismatches << "/1000, selective mismatches="
      << sel_mismatches << "/200, ece fixture error=" << ece_err << " (need < 1e-12)";
    report(7, ok, d.str());
}

void criterion_8() {
    // 5-entity, d=4 toy model, full training loss (BCE + corruptions + KL).
    TrainConfig cfg;
    cfg.dim = 4;
    cfg.seed = 11;
    GaussianEmbeddingModel m = init_model(5, 3, cfg);
    DetRng prng(mix_u64(11, 17));
    for (double& l : m.ell) l = prng.uniform(-2.0, 0.5);

    TrainingBatch b;
    b.negatives_per_positive = 3;
    DetRng rng(mix_u64(29, 23));
    for (int i = 0; i < 4; ++i) {
        Triple t;
        t.head = static_cast<EntityId>(rng.below(5));
        t.relation = static_cast<RelationId>(rng.below(3));
        t.tail = static_cast<EntityId>(rng.below(5));
        b.positives.push_back(t);
        for (int j = 0; j < 4; ++j) b.noise_head.push_back(rng.gaussian());
        for (int j = 0; j < 4; ++j) b.noise_tail.push_back(rng.gaussian());
        for (int c = 0; c < 3; ++c) {
            b.corruption_entities.push_back(static_cast<EntityId>(rng.below(5)));
        }
    }

    GradientBuffer grad;
    grad.resize_like(m);
    grad.clear_touched(m);
    batch_loss_and_grad(m, b, 0.01, grad);

    GradientBuffer scratch;
    scratch.resize_like(m);
    const double h = 1e-5;
    double worst = 0.0;
    auto check_param = [&](double& prm, double analytic) {
        double keep = prm;
        prm = keep + h;
        scratch.clear_touched(m);
        double up = batch_loss_and_grad(m, b, 0.01, scratch);
        prm = keep - h;
        scratch.clear_touched(m);
        double down = batch_loss_and_grad(m, b, 0.01, scratch);
        prm = keep;
        double fd = (up - down) / (2.0 * h);
        double err = std::abs(fd - analytic) / std::max({1e-8, std::abs(fd), std::abs(analytic)});
        worst = std::max(worst, err);
    };
    for (std::size_t i = 0; i < m.mu.size(); ++i) check_param(m.mu[i], grad.mu[i]);
    for (std::size_t i = 0; i < m.ell.size(); ++i) check_param(m.ell[i], grad.ell[i]);
    for (std::size_t i = 0; i < m.rel.size(); ++i) check_param(m.rel[i], grad.rel[i]);

    std::ostringstream d;
    d << "max relative gradient error = " << worst << " (need < 1e-4)";
    report(8, worst < 1e-4, d.str());
}

void criterion_10() {
    RunConfig cfg;
    cfg.synthetic = true;
    cfg.synth.entities = 120;
    cfg.synth.relations = 6;
    cfg.synth.emerging_entities = 12;
    cfg.synth.core_rounds = 12;
    cfg.synth.extra_train = 400;
    cfg.synth.eval_id = 120;
    cfg.synth.eval_novel = 60;
    cfg.synth.eval_emerging = 40;
    cfg.synth.tau = 6;
    cfg.synth_seed = 19;
    cfg.train.dim = 12;
    cfg.train.batch_size = 64;
    cfg.train.negatives_per_positive = 8;
    cfg.train.epochs = 6;
    cfg.train.learning_rate = 0.01;
    cfg.bootstrap_iterations = 100;
    cfg.baseline_draws = 4;

    auto run_into = [&](const std::string& dir) {
        RunConfig c = cfg;
        c.out_dir = dir;
        fs::remove_all(dir);
        std::ostringstream sink;
        cmd_prepare(c, sink);
        cmd_train(c, sink);
        cmd_eval(c, "temporal_like", sink);
        return sink.str();
    };
    run_into("acceptance_out/det_a");
    run_into("acceptance_out/det_b");
    auto slurp = [](const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    RunPaths pa = RunPaths::in("acceptance_out/det_a");
    RunPaths pb = RunPaths::in("acceptance_out/det_b");
    bool ok = true;
    std::string what;
    for (auto [x, y] : {std::pair{pa.checkpoint, pb.checkpoint},
                        {pa.partition_test_csv, pb.partition_test_csv},
                        {pa.partition_valid_csv, pb.partition_valid_csv},
                        {pa.metrics_json("temporal_like"), pb.metrics_json("temporal_like")}}) {
        if (slurp(x) != slurp(y)) {
            ok = false;
            what = x;
            break;
        }
    }
    std::ostringstream d;
    if (ok) {
        d << "two identical runs produced bit-identical checkpoint, partitions and metrics";
    } else {
        d << "outputs differ between identical runs (first difference: " << what << ")";
    }
    report(10, ok, d.str());
}

void criterion_9() {
    std::string why;
    if (!fb15k_available(why)) return skip(9, why);
    if (std::getenv("CAGP_SKIP_TRAINED")) {
        return skip(9, "needs the criterion-5 trained model (CAGP_SKIP_TRAINED set)");
    }
    Fb15kContext& c = fb15k_context();
    TrainedFb15k& t = trained_fb15k();
    double lo = 2.0, hi = -1.0;
    std::ostringstream d;
    d << "CAGP AUROC across tau percentiles:";
    for (double pct : {0.05, 0.10, 0.20}) {
        std::uint64_t tau = frequency_threshold(c.kg, pct);
        double a = cagp_auroc_at_tau(c, t, tau);
        d << " p" << pct * 100 << "=" << a;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    double range = hi - lo;
    d << "; range=" << range << " (need <= 0.03)";
    report(9, range <= 0.03, d.str());
}

}  // namespace

int main(int argc, char** argv) {
    std::string subset = "all";
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--subset" && i + 1 < argc) subset = argv[++i];
    }
    bool desk = subset == "all" || subset == "desk";
    bool fb = subset == "all" || subset == "fb15k237";
    if (!desk && !fb) {
        std::cerr << "unknown subset '" << subset << "' (expected desk|fb15k237|all)\n";
        return 2;
    }

    // A criterion that throws (wrong dataset files, truncated inputs) is a
    // failure, not a crash.
    auto guarded = [](int id, void (*fn)()) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, false, std::string("exception: ") + e.what());
        }
    };
    if (fb) guarded(1, criterion_1);
    if (fb) guarded(2, criterion_2);
    if (fb) guarded(3, criterion_3);
    if (fb) guarded(4, criterion_4);
    if (fb) guarded(5, criterion_5);
    if (desk) guarded(6, criterion_6);
    if (desk) guarded(7, criterion_7);
    if (desk) guarded(8, criterion_8);
    if (fb) guarded(9, criterion_9);
    if (desk) guarded(10, criterion_10);

    std::cout << g_pass << " passed, " << g_fail << " failed, " << g_skip << " skipped\n";
    if (g_fail > 0) return 1;
    if (g_pass == 0 && g_skip > 0) return 77;
    return 0;
}
