#include <cmath>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_support.hpp"
#include "zsmad/baselines.hpp"
#include "zsmad/errors.hpp"

namespace {

using namespace zsmad;
using zsmad::testing::kFixtures;
using zsmad::testing::slurp;
using zsmad::testing::TempDir;

const auto kBackbones = kFixtures / "toy_bundle" / "backbones";

TEST(Prototype, SingleReferenceIsItsOwnDirection) {
    const std::vector<Embedding> refs = {{3.f, 4.f}};
    const auto s = fit_prototype("one", refs, {"r"});
    EXPECT_NEAR(s.prototype[0], 0.6, 1e-7);
    EXPECT_NEAR(s.prototype[1], 0.8, 1e-7);
    EXPECT_EQ(s.ref_count, 1u);
    EXPECT_NEAR(prototype_score(s, {6.f, 8.f}), 0.0, 1e-7);
}

TEST(Prototype, HandComputedMeanDirection) {
    // Normalised inputs (1,0), (0,1), (0.6,0.8); mean (1.6,1.8)/3; unit (1.6,1.8)/sqrt(5.8).
    const std::vector<Embedding> refs = {{2.f, 0.f}, {0.f, 0.5f}, {3.f, 4.f}};
    const auto s = fit_prototype("three", refs);
    EXPECT_NEAR(s.prototype[0], 1.6 / std::sqrt(5.8), 1e-7);
    EXPECT_NEAR(s.prototype[1], 1.8 / std::sqrt(5.8), 1e-7);
    EXPECT_EQ(s.ref_count, 3u);
}

TEST(Prototype, AntipodalReferencesAreDegenerate) {
    const std::vector<Embedding> refs = {{1.f, 0.f}, {-1.f, 0.f}};
    EXPECT_THROW(fit_prototype("x", refs), DegenerateError);
    EXPECT_THROW(fit_prototype("x", std::vector<Embedding>{}), EmptyReferenceError);
    EXPECT_THROW(fit_prototype("x", std::vector<Embedding>{{1.f, 0.f}, {1.f, 0.f, 0.f}}), ConstraintError);
}

TEST(Prototype, ScoreConvention) {
    const auto s = fit_prototype("x", std::vector<Embedding>{{1.f, 0.f}});
    EXPECT_EQ(prototype_score(s, {1.f, 0.f}), 0.0);
    EXPECT_NEAR(prototype_score(s, {0.f, 1.f}), 0.5, 1e-12);
    EXPECT_NEAR(prototype_score(s, {-1.f, 0.f}), 1.0, 1e-12);
    for (float a = -3.f; a < 3.f; a += 0.37f) {
        const double v = prototype_score(s, {std::cos(a), std::sin(a)});
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Prototype, JsonRoundTrip) {
    const auto s = fit_prototype("vit", std::vector<Embedding>{{1.f, 2.f}, {2.f, 1.f}}, {"a", "b"});
    EXPECT_EQ(scorer_from_json(scorer_to_json(s)), s);
    EXPECT_THROW(scorer_from_json("{"), ParseError);
}

TEST(Backbone, LoadsToyGraphs) {
    for (const char* name : {"resnet50", "vgg19", "vit"}) {
        const auto b = Backbone::load(kBackbones / (std::string(name) + ".onnx"));
        EXPECT_EQ(b.name(), name);
        EXPECT_EQ(b.spec().target_size, 32);
    }
    EXPECT_THROW(Backbone::load(kBackbones / "missing.onnx"), BundleError);
    TempDir dir;
    std::filesystem::copy_file(kBackbones / "vit.onnx", dir / "vit.onnx");
    EXPECT_THROW(Backbone::load(dir / "vit.onnx"), BundleError);
    dir.write("vit.json", "{\"name\": \"vit\"}");
    EXPECT_THROW(Backbone::load(dir / "vit.onnx"), BundleError);
}

TEST(Backbone, ScoresMatchReferenceRuntime) {
    const auto oracle = nlohmann::json::parse(slurp(kFixtures / "toy_run" / "oracle.json")).at("baseline_scores");
    const Manifest eval = load_manifest(kFixtures / "samples" / "manifest.csv");
    const Manifest ref = load_manifest(kFixtures / "samples" / "reference.csv");
    for (const char* name : {"resnet50", "vgg19", "vit"}) {
        const Baseline b{Backbone::load(kBackbones / (std::string(name) + ".onnx")), {}};
        const Baseline fitted{b.backbone, fit_prototype(b.backbone, ref, 2)};
        EXPECT_EQ(fitted.scorer.ref_count, 3u);
        EXPECT_EQ(fitted.scorer.reference_ids, (std::vector<std::string>{"ref-1", "ref-2", "ref-3"}));
        size_t n = 0;
        for (const auto& s : eval.samples) {
            if (!oracle.at(name).contains(s.id)) continue;
            const auto img = preprocess(decode(eval.resolve(s)), fitted.backbone.spec());
            EXPECT_NEAR(baseline_score(fitted.scorer, fitted.backbone, img), oracle.at(name).at(s.id).get<double>(), 1e-6)
                << name << " " << s.id;
            ++n;
        }
        EXPECT_EQ(n, 11u);
    }
}

TEST(Backbone, ReferenceMustBeBonaFideAndDisjoint) {
    const Manifest eval = load_manifest(kFixtures / "samples" / "manifest.csv");
    const auto b = Backbone::load(kBackbones / "vgg19.onnx");
    EXPECT_THROW(fit_prototype(b, eval), ConstraintError);
    Manifest empty;
    EXPECT_THROW(fit_prototype(b, empty), EmptyReferenceError);
    const auto overlapping = fit_prototype("vgg19", std::vector<Embedding>{{1.f}}, {"bf-d1"});
    EXPECT_THROW(check_disjoint(overlapping, eval), ConstraintError);
    const auto clean = fit_prototype("vgg19", std::vector<Embedding>{{1.f}}, {"ref-1"});
    EXPECT_NO_THROW(check_disjoint(clean, eval));
}

}  // namespace
