#include <cmath>
#include <map>

#include "cagp/verify.hpp"
#include "doctest.h"

using namespace cagp;

namespace {

// Model whose per-entity variance is a fixed decreasing function of the
// training frequency; used to test the theorems at their assumptions.
GaussianEmbeddingModel freq_forced_model(const KnowledgeGraph& kg) {
    TrainConfig cfg;
    cfg.dim = 1;
    GaussianEmbeddingModel m = init_model(kg.entity_count(), kg.relation_count(), cfg);
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        double f = static_cast<double>(kg.freq[e]);
        m.ell[e] = std::log(1.0 / (1.0 + f));
    }
    return m;
}

}  // namespace

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3}, {0.9, 0.5, 0.1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    // hand computation with rank displacement (2,1,4,3)
    CHECK(spearman({1, 2, 3, 4}, {2, 1, 4, 3}) == doctest::Approx(0.6));
    SUBCASE("ties use average ranks") {
        // x ranks: (1.5, 1.5, 3); y strictly increasing -> positive but < 1
        double rho = spearman({5, 5, 9}, {1, 2, 3});
        CHECK(rho > 0.0);
        CHECK(rho < 1.0);
    }
    SUBCASE("constant input undefined") {
        CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), UndefinedMetric);
    }
    SUBCASE("length mismatch rejected") {
        CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), InvalidInput);
    }
}

TEST_CASE("assumption report on the synthetic fixture") {
    SynthSpec spec;
    SyntheticKg synth = synth_theorem_kg(spec, 42);
    const KnowledgeGraph& kg = synth.kg;
    CoverageMatrix cov = build_coverage(kg);
    GaussianEmbeddingModel m = freq_forced_model(kg);
    SemanticNormalizer n = fit_normalizer(m, kg);
    AssumptionReport r =
        assumption_report(kg, cov, m, n, synth.ground_truth, {0, 1, 5, 10});

    SUBCASE("a1 is strongly negative for a forced variance table") {
        REQUIRE(r.a1_spearman.has_value());
        CHECK(*r.a1_spearman < -0.99);
    }
    SUBCASE("a2 holds by construction on our own partition") {
        REQUIRE(r.a2_coverage_rate.has_value());
        CHECK(*r.a2_coverage_rate == 1.0);
    }
    SUBCASE("a3 matches at every epsilon on the matched-by-construction fixture") {
        REQUIRE(r.a3_matched_fraction.size() == 4);
        for (double f : r.a3_matched_fraction) CHECK(f == 1.0);
    }
    SUBCASE("a5 sits strictly inside (0,1)") {
        REQUIRE(r.a5_rho.has_value());
        CHECK(*r.a5_rho > 0.0);
        CHECK(*r.a5_rho < 1.0);
    }
    SUBCASE("a6 semantic separates emerging from id under forced variances") {
        REQUIRE(r.a6_auroc_emerging.has_value());
        CHECK(*r.a6_auroc_emerging > 0.9);
    }
    SUBCASE("theorem predictions") {
        REQUIRE(r.semantic_on_novel.has_value());
        CHECK(*r.semantic_on_novel > 0.45);
        CHECK(*r.semantic_on_novel < 0.55);
        REQUIRE(r.structural_on_novel.has_value());
        CHECK(*r.structural_on_novel == 1.0);
    }
    SUBCASE("report serializes") {
        CHECK(r.to_json().find("a1_spearman") != std::string::npos);
        CHECK(r.to_text().find("structural AUROC on novel") != std::string::npos);
    }
}

TEST_CASE("a4 delta is zero when novel and id normalized values coincide") {
    std::map<std::string, std::vector<SurfaceTriple>> s;
    s["train"] = {{"A", "r1", "B"}, {"A", "r1", "B"}, {"B", "r2", "A"}};
    KnowledgeGraph kg = build_graph(s);
    CoverageMatrix cov = build_coverage(kg);
    TrainConfig cfg;
    cfg.dim = 1;
    GaussianEmbeddingModel m = init_model(kg.entity_count(), kg.relation_count(), cfg);
    m.ell = {0.0, 0.0};  // identical variances everywhere
    SemanticNormalizer n = fit_normalizer(m, kg);
    OodPartition p;
    p.tau = 1;
    p.in_distribution = {{0, 0, 1}};
    p.novel_context = {{0, 1, 1}};  // (A,r2,B): c(A,r2)=0
    AssumptionReport r = assumption_report(kg, cov, m, n, p, {1});
    REQUIRE(r.a4_delta.has_value());
    CHECK(*r.a4_delta == 0.0);
}

TEST_CASE("empty partition classes are reported as not applicable") {
    SynthSpec spec;
    spec.heldout_fraction = 0.0;
    spec.emerging_entities = 0;
    spec.eval_novel = 0;
    spec.eval_emerging = 0;
    SyntheticKg synth = synth_theorem_kg(spec, 7);
    CoverageMatrix cov = build_coverage(synth.kg);
    GaussianEmbeddingModel m = freq_forced_model(synth.kg);
    SemanticNormalizer n = fit_normalizer(m, synth.kg);
    AssumptionReport r = assumption_report(synth.kg, cov, m, n, synth.ground_truth, {1});
    CHECK(!r.a4_delta.has_value());
    CHECK(!r.a5_rho.has_value());
    CHECK(!r.a6_auroc_emerging.has_value());
    CHECK(!r.semantic_on_novel.has_value());
    CHECK(r.to_text().find("n/a") != std::string::npos);
}

TEST_CASE("complementarity table on the synthetic fixture") {
    SynthSpec spec;
    SyntheticKg synth = synth_theorem_kg(spec, 42);
    CoverageMatrix cov = build_coverage(synth.kg);
    GaussianEmbeddingModel m = freq_forced_model(synth.kg);
    SemanticNormalizer n = fit_normalizer(m, synth.kg);

    // Fit alpha on the fixture itself (population-level theorem check).
    std::vector<ValidationPoint> points;
    auto push = [&](const std::vector<Triple>& ts, bool ood) {
        for (const Triple& t : ts) {
            points.push_back({n.normalize(semantic_uncertainty(m, t)),
                              static_cast<double>(structural_uncertainty(cov, t)), ood});
        }
    };
    push(synth.ground_truth.in_distribution, false);
    push(synth.ground_truth.emerging, true);
    push(synth.ground_truth.novel_context, true);
    MixingWeight w = fit_alpha(points);

    ComplementarityTable table = complementarity_table(m, n, cov, w, synth.ground_truth);
    REQUIRE(table.rows.size() == 4);
    auto row = [&](const std::string& name) {
        for (const auto& r : table.rows) {
            if (r.signal == name) return r;
        }
        FAIL("missing row");
        return table.rows[0];
    };

    SUBCASE("structural is exactly perfect on novel contexts") {
        CHECK(*row("structural").novel == 1.0);
    }
    SUBCASE("semantic is near-random on novel contexts") {
        CHECK(*row("semantic").novel > 0.4);
        CHECK(*row("semantic").novel < 0.6);
    }
    SUBCASE("cagp dominates both single signals overall") {
        double best_single = std::max(*row("semantic").overall, *row("structural").overall);
        CHECK(*row("cagp").overall >= best_single);
    }
    SUBCASE("structural auroc on novel is 1 exactly whenever a2 holds") {
        AssumptionReport r =
            assumption_report(synth.kg, cov, m, n, synth.ground_truth, {0});
        REQUIRE(r.a2_coverage_rate.has_value());
        if (*r.a2_coverage_rate == 1.0) {
            CHECK(*row("structural").novel == 1.0);
        }
    }
}
