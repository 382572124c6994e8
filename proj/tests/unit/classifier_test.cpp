#include <atomic>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "zsmad/classifier.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/report.hpp"

namespace {

using namespace zsmad;
using zsmad::testing::kFixtures;
using zsmad::testing::slurp;

TEST(Softmax, MatchesHighPrecisionValue) {
    // 1 / (1 + exp(-5)) evaluated with 50-digit arithmetic.
    const auto p = softmax_pair(0.30, 0.35, 100.0);
    EXPECT_NEAR(p.p_morph, 0.99330714907571514444, 1e-15);
    EXPECT_NEAR(p.p_bonafide, 0.0066928509242848555, 1e-15);
}

TEST(Softmax, EqualCosinesGiveOneHalf) {
    const auto p = softmax_pair(0.2, 0.2, 100.0);
    EXPECT_EQ(p.p_morph, 0.5);
    EXPECT_EQ(p.p_bonafide, 0.5);
}

TEST(Softmax, StaysFiniteAtLargeScale) {
    const auto p = softmax_pair(-1.0, 1.0, 1000.0);
    EXPECT_EQ(p.p_morph, 1.0);
    EXPECT_EQ(p.p_bonafide, 0.0);
    EXPECT_FALSE(std::isnan(softmax_pair(1.0, -1.0, 1000.0).p_morph));
}

TEST(Softmax, RandomProperties) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> cos(-1.0, 1.0), scale(0.1, 1000.0);
    for (int i = 0; i < 2000; ++i) {
        const double b = cos(rng), m = cos(rng), s = scale(rng);
        const auto p = softmax_pair(b, m, s);
        EXPECT_NEAR(p.p_morph + p.p_bonafide, 1.0, 1e-12);
        EXPECT_EQ(p.p_morph > 0.5, m > b);
        const auto swapped = softmax_pair(m, b, s);
        EXPECT_NEAR(swapped.p_morph, p.p_bonafide, 1e-15);
        EXPECT_GE(softmax_pair(b, std::min(1.0, m + 0.01), s).p_morph, p.p_morph);
    }
}

TEST(Softmax, RejectsBadInput) {
    EXPECT_THROW(softmax_pair(NAN, 0.1, 100), ConstraintError);
    EXPECT_THROW(softmax_pair(0.1, 0.1, 0), ConstraintError);
    EXPECT_THROW(softmax_pair(0.1, 0.1, INFINITY), ConstraintError);
}

TEST(Classify, ThresholdIsInclusive) {
    EXPECT_EQ(classify(0.5, 0.5), Label::Morph);
    EXPECT_EQ(classify(std::nextafter(0.5, 0.0), 0.5), Label::BonaFide);
    EXPECT_EQ(classify(0.0, 0.0), Label::Morph);
}

TEST(Score, TieOnCosinePredictsBonaFide) {
    const PromptPair pair{"t", "real", "fake", PromptCategory::Short};
    const PromptEmbeddings texts{{1.f, 0.f}, {0.f, 1.f}};
    const auto tie = score({0.6f, 0.6f}, pair, texts, 100.0);
    EXPECT_EQ(tie.predicted_text, "real");
    EXPECT_EQ(tie.p_morph, 0.5);
    const auto morph = score({0.5f, 0.6f}, pair, texts, 100.0);
    EXPECT_EQ(morph.predicted_text, "fake");
    EXPECT_EQ(morph.prompt_id, "t");
    EXPECT_NEAR(morph.cos_morph, 0.6, 1e-7);
}

TEST(PromptBank, DefaultBankShape) {
    const auto bank = default_prompt_bank();
    ASSERT_EQ(bank.pairs.size(), 10u);
    for (size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(bank.pairs[i].category, i < 5 ? PromptCategory::Short : PromptCategory::Long);
        EXPECT_EQ(bank.pairs[i].id, fmt::format("p{:02}", i + 1));
    }
    EXPECT_NO_THROW(bank.validate());
    EXPECT_EQ(prompt_bank_from_json(prompt_bank_to_json(bank)), bank);
    EXPECT_EQ(prompt_bank_from_json(slurp(kFixtures / "toy_run" / "bank.json")), bank);
}

TEST(PromptBank, Validation) {
    EXPECT_THROW(PromptBank{}.validate(), ConstraintError);
    EXPECT_THROW((PromptBank{{{"a", "x", "y"}, {"a", "u", "v"}}}.validate()), ConstraintError);
    EXPECT_THROW((PromptBank{{{"a", "", "y"}}}.validate()), ConstraintError);
    EXPECT_THROW((PromptBank{{{"a", "same", "same"}}}.validate()), ConstraintError);
    EXPECT_THROW(default_prompt_bank().find("p99"), ConstraintError);
    EXPECT_EQ(default_prompt_bank().find("p07").category, PromptCategory::Long);
}

TEST(PromptBank, JsonErrors) {
    EXPECT_THROW(prompt_bank_from_json("{"), ParseError);
    EXPECT_THROW(prompt_bank_from_json("{}"), SchemaError);
    EXPECT_THROW(prompt_bank_from_json(R"([{"id": "a", "bonafide_text": "x", "morph_text": "y"}])"), SchemaError);
    EXPECT_THROW(prompt_bank_from_json(R"([{"id": "a", "bonafide_text": "x", "morph_text": "y", "category": "medium"}])"),
                 ParseError);
    const auto bank = prompt_bank_from_json(R"([{"id": "a", "bonafide_text": "x", "morph_text": "y", "category": "LONG"}])");
    EXPECT_EQ(bank.pairs.at(0).category, PromptCategory::Long);
}

// Fixed embeddings keyed on the first pixel and the first content token.
class CountingModel final : public EmbeddingModel {
public:
    CountingModel() : vocab_(Vocabulary::from_merges({})) {
        config_.embed_dim = 2;
        config_.image_size = 2;
        config_.logit_scale = 10;
        config_.channel_std = {1.f, 1.f, 1.f};
    }
    const BundleConfig& config() const override { return config_; }
    const Vocabulary& vocab() const override { return vocab_; }
    Embedding encode_image(const ImageTensor& t) const override {
        ++images;
        return normalize(std::vector<float>{1.f, t.data[0] + 0.1f});
    }
    Embedding encode_text(const TokenSequence& s) const override {
        ++texts;
        return normalize(std::vector<float>{1.f, static_cast<float>(s.ids[1] % 7) - 3.f});
    }
    mutable std::atomic<int> images{0};
    mutable std::atomic<int> texts{0};

private:
    BundleConfig config_;
    Vocabulary vocab_;
};

TEST(RunBank, EncodesEachImageAndTextOnce) {
    const Manifest m = load_manifest(kFixtures / "samples" / "manifest.csv");
    const auto bank = default_prompt_bank();
    CountingModel model;
    const BankRun run = run_bank(m, bank, model, 4);
    EXPECT_EQ(model.texts.load(), 20);
    EXPECT_EQ(model.images.load(), 11);
    EXPECT_EQ(run.records.size(), 110u);
    ASSERT_EQ(run.skipped.size(), 1u);
    EXPECT_EQ(run.skipped[0].id, "bf-broken");
    EXPECT_EQ(run.skipped[0].reason, "images/broken.png: truncated PNG (no IEND chunk)");
    EXPECT_TRUE(std::is_sorted(run.records.begin(), run.records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.sample_id, a.prompt_id) < std::tie(b.sample_id, b.prompt_id);
    }));
}

TEST(RunBank, ToyScoresMatchGoldenAtAnyThreadCount) {
    const Manifest m = load_manifest(kFixtures / "samples" / "manifest.csv");
    const ModelBundle bundle = load_bundle(kFixtures / "toy_bundle");
    const std::string golden = slurp(kFixtures / "toy_run" / "golden" / "scores.csv");
    for (int threads : {1, 3, 8}) {
        EXPECT_EQ(scores_to_csv(run_bank(m, default_prompt_bank(), bundle, threads).records), golden) << threads;
    }
}

TEST(RunBank, SingleScoreAgreesWithBankRun) {
    const Manifest m = load_manifest(kFixtures / "samples" / "manifest.csv");
    const ModelBundle bundle = load_bundle(kFixtures / "toy_bundle");
    const auto bank = default_prompt_bank();
    const auto run = run_bank(m, bank, bundle, 2);
    const Embedding e = embed_sample(m, m.samples[0], bundle);
    const ScoreRecord r = score(e, bank.pairs[3], bundle);
    const auto it = std::find_if(run.records.begin(), run.records.end(), [&](const auto& x) {
        return x.sample_id == m.samples[0].id && x.prompt_id == bank.pairs[3].id;
    });
    ASSERT_NE(it, run.records.end());
    EXPECT_EQ(it->p_morph, r.p_morph);
    EXPECT_EQ(it->predicted_text, r.predicted_text);
}

}  // namespace
