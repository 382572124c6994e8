#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zsmad/classifier.hpp"
#include "zsmad/imaging.hpp"

namespace zsmad {

struct SegmentMask {
    int height = 0;
    int width = 0;
    int rows = 0;  // grid cells actually covering the image
    int cols = 0;
    int cell_height = 0;
    int cell_width = 0;
    int n_segments = 0;
    std::vector<int32_t> ids;  // per pixel, row-major
};

// Square grid of ceil(sqrt(n)) cells per side. Cells are ceil(dim / side)
// pixels, the last row and column clipped to the image; cells that would lie
// wholly outside are dropped and ids stay contiguous.
SegmentMask segment(const RawImage& img, int n);

struct SaliencyMap {
    std::vector<double> weights;  // one per segment
    double intercept = 0;
    double fit_quality = 0;  // weighted R^2 of the surrogate, in [0, 1]
    uint64_t seed = 0;       // seed of the sample set that was fitted
};

struct ExplainOptions {
    int n_samples = 1000;
    uint64_t seed = 0;
    double kernel_width = 0;  // 0 selects 0.25 * sqrt(n_segments)
    double ridge = 1.0;
    int threads = 1;
};

inline constexpr int kDefaultSegments = 49;

using ImageScorer = std::function<double(const RawImage&)>;

// Per-channel mean colour, rounded.
std::array<uint8_t, 3> mean_color(const RawImage& img);

// The image with every segment whose flag is 0 filled with `fill`.
RawImage perturb(const RawImage& img, const SegmentMask& mask, const std::vector<uint8_t>& on, std::array<uint8_t, 3> fill);

// Samples on/off segment vectors (the first all on), scores the perturbed
// images and fits a kernel-weighted ridge surrogate. Throws ConstraintError
// (too few samples) and SingularFitError (rank-deficient design twice).
SaliencyMap explain(const RawImage& img, const SegmentMask& mask, const ImageScorer& scorer, const ExplainOptions& options);

// Scorer: p_morph of the pair for the perturbed image.
SaliencyMap explain(const RawImage& img, const PromptPair& pair, const EmbeddingModel& model, const SegmentMask& mask,
                    const ExplainOptions& options);

// Red where segments push toward morph, blue toward bona fide; opacity grows
// with |weight| relative to the largest.
RawImage saliency_overlay(const RawImage& img, const SegmentMask& mask, const SaliencyMap& map);

std::string saliency_to_json(const SaliencyMap& map, const SegmentMask& mask, const ExplainOptions& options,
                             const std::string& prompt_id);

}  // namespace zsmad
