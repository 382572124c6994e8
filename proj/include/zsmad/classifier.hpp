#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zsmad/encoder.hpp"
#include "zsmad/manifest.hpp"

namespace zsmad {

enum class PromptCategory { Short, Long };
std::string_view to_string(PromptCategory c);

struct PromptPair {
    std::string id;
    std::string bonafide_text;
    std::string morph_text;
    PromptCategory category = PromptCategory::Short;
    bool operator==(const PromptPair&) const = default;
};

struct PromptBank {
    std::vector<PromptPair> pairs;

    // Nonempty; ids unique, texts nonempty and distinct within a pair. Throws ConstraintError.
    void validate() const;
    const PromptPair& find(const std::string& id) const;  // throws ConstraintError
    bool operator==(const PromptBank&) const = default;
};

// Ten placeholder pairs, five short then five long, ids p01..p10.
PromptBank default_prompt_bank();

// JSON array of {id, bonafide_text, morph_text, category}.
PromptBank load_prompt_bank(const std::filesystem::path& path);
PromptBank prompt_bank_from_json(const std::string& text);
std::string prompt_bank_to_json(const PromptBank& bank);

struct ScoreRecord {
    std::string sample_id;
    std::string prompt_id;
    double p_morph = 0.5;
    double p_bonafide = 0.5;
    double cos_bonafide = 0;
    double cos_morph = 0;
    std::string predicted_text;
    bool operator==(const ScoreRecord&) const = default;
};

struct PairProbabilities {
    double p_bonafide;
    double p_morph;
};

// Softmax over logit_scale * (cos_b, cos_m) with max subtraction.
PairProbabilities softmax_pair(double cos_bonafide, double cos_morph, double logit_scale);

struct PromptEmbeddings {
    Embedding bonafide;
    Embedding morph;
};

PromptEmbeddings embed_prompt(const PromptPair& pair, const EmbeddingModel& model);

// Ties on cosine predict the bona fide text.
ScoreRecord score(const Embedding& image, const PromptPair& pair, const PromptEmbeddings& texts, double logit_scale);
ScoreRecord score(const Embedding& image, const PromptPair& pair, const EmbeddingModel& model);

// Morph iff p_morph >= threshold.
Label classify(double p_morph, double threshold);

struct SkippedSample {
    std::string id;
    std::string reason;
    bool operator==(const SkippedSample&) const = default;
};

struct BankRun {
    std::vector<ScoreRecord> records;  // sorted by (sample_id, prompt_id)
    std::vector<SkippedSample> skipped;  // manifest order
};

// Decodes, preprocesses and embeds one manifest sample.
Embedding embed_sample(const Manifest& manifest, const FaceSample& sample, const EmbeddingModel& model);

// Scores every sample against every pair. Each text and each image is encoded
// once; samples that fail to load or encode are skipped and reported.
BankRun run_bank(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model, int threads = 1);

}  // namespace zsmad
