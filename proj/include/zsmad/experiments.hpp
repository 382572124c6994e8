#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsmad/baselines.hpp"
#include "zsmad/classifier.hpp"
#include "zsmad/metrics.hpp"

namespace zsmad {

inline constexpr double kDefaultTargetMacer = 0.10;

// One (prompt, generator, medium) evaluation: the morphs of that generator
// and medium against all bona fide samples of the medium.
struct Cell {
    std::string prompt_id;
    PromptCategory category = PromptCategory::Short;
    Generator generator = Generator::None;
    Medium medium = Medium::Digital;
    std::size_t n_bonafide = 0;
    std::size_t n_morph = 0;
    bool degenerate = false;  // a class is empty; op is unset
    OperatingPoint op;
    bool operator==(const Cell&) const = default;
};

struct ExperimentResult {
    double target_macer = kDefaultTargetMacer;
    std::vector<Cell> cells;  // bank order, then generator, then medium
    std::vector<SkippedSample> skipped;

    std::vector<const Cell*> degenerate_cells() const;
};

// Box-plot summary of cell BPCERs. Unset key fields mean "all".
struct AggregateStat {
    std::string group;  // "generator-medium", "medium", "prompt", ...
    std::optional<Generator> generator;
    std::optional<Medium> medium;
    std::optional<PromptCategory> category;
    std::optional<std::string> prompt_id;
    std::size_t n = 0;
    double mean = 0, min = 0, q1 = 0, median = 0, q3 = 0, max = 0;

    std::string key() const;
    bool operator==(const AggregateStat&) const = default;
};

// Linear-interpolated quantile (the common default, type 7) of sorted values.
double quantile(std::span<const double> sorted, double q);

// Summary over the values; n = 0 leaves every statistic at 0.
AggregateStat summarize(std::string group, std::vector<double> values);

// p_morph scores of one cell's samples under one prompt.
LabeledScores cell_scores(const Manifest& manifest, const BankRun& run, const Cell& cell);

// Cells over the generators and mediums present in the manifest.
ExperimentResult build_cells(const Manifest& manifest, const PromptBank& bank, const BankRun& run, double target_macer);

ExperimentResult experiment1(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model,
                             double target_macer = kDefaultTargetMacer, int threads = 1);

// Non-degenerate cells grouped by generator x medium, generator x medium x
// category, medium, medium x category, and category.
std::vector<AggregateStat> experiment2(const ExperimentResult& result);

struct PromptRanking {
    std::vector<AggregateStat> per_prompt;  // bank order; prompts without cells omitted
    std::string best_prompt;                // lowest mean, first in bank order on ties
};

PromptRanking experiment3(const ExperimentResult& result, const PromptBank& bank);

// One row of the model comparison table.
struct ComparisonRow {
    std::string model;
    Medium medium = Medium::Digital;
    std::string prompt_id;  // dual-encoder rows only
    std::size_t n_bonafide = 0;
    std::size_t n_morph = 0;
    bool degenerate = false;
    OperatingPoint op;
    bool operator==(const ComparisonRow&) const = default;
};

inline constexpr const char* kDualEncoderName = "dual-encoder";

// Baseline scores per sample id, one map per named model.
struct ModelScores {
    std::string model;
    std::vector<std::pair<std::string, double>> scores;  // (sample_id, score)
};

// For every medium present: the dual-encoder with the prompt that does best
// on the pooled medium slice, then each baseline on that same slice.
std::vector<ComparisonRow> compare_from_scores(const Manifest& manifest, const PromptBank& bank, const BankRun& run,
                                               std::span<const ModelScores> baselines, double target_macer);

ModelScores score_baseline(const Manifest& manifest, const Baseline& baseline, int threads = 1);

std::vector<ComparisonRow> compare_models(const Manifest& manifest, const PromptBank& bank, const EmbeddingModel& model,
                                          std::span<const Baseline> baselines, double target_macer = kDefaultTargetMacer,
                                          int threads = 1);

}  // namespace zsmad
