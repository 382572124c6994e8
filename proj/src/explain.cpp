#include "zsmad/explain.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "zsmad/errors.hpp"
#include "zsmad/parallel.hpp"

namespace zsmad {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::vector<std::vector<uint8_t>> draw_samples(int n_samples, int n_segments, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<uint8_t>> z(static_cast<size_t>(n_samples), std::vector<uint8_t>(static_cast<size_t>(n_segments), 1));
    for (size_t i = 1; i < z.size(); ++i) {
        for (auto& bit : z[i]) bit = static_cast<uint8_t>(rng() >> 63);
    }
    return z;
}

struct Fit {
    bool full_rank = false;
    SaliencyMap map;
};

Fit fit_surrogate(const std::vector<std::vector<uint8_t>>& z, const std::vector<double>& y, double width, double ridge) {
    const auto n = static_cast<Eigen::Index>(z.size());
    const auto k = static_cast<Eigen::Index>(z.front().size());
    Eigen::MatrixXd x(n, k + 1);
    Eigen::VectorXd pi(n), target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = z[static_cast<size_t>(i)];
        x(i, 0) = 1.0;
        int off = 0;
        for (Eigen::Index j = 0; j < k; ++j) {
            x(i, j + 1) = row[static_cast<size_t>(j)];
            off += row[static_cast<size_t>(j)] ? 0 : 1;
        }
        const double d = static_cast<double>(off) / static_cast<double>(k);
        pi(i) = std::exp(-(d * d) / (width * width));
        target(i) = y[static_cast<size_t>(i)];
    }
    const Eigen::VectorXd sw = pi.cwiseSqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * x;
    Fit fit;
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(xw).rank() < k + 1) return fit;
    fit.full_rank = true;

    Eigen::MatrixXd a = xw.transpose() * xw;
    for (Eigen::Index j = 1; j <= k; ++j) a(j, j) += ridge;
    const Eigen::VectorXd beta = a.ldlt().solve(xw.transpose() * (sw.asDiagonal() * target));
    const Eigen::VectorXd pred = x * beta;
    const double wsum = pi.sum();
    const double ybar = pi.dot(target) / wsum;
    const double ss_res = pi.dot((target - pred).cwiseAbs2());
    const double ss_tot = pi.dot((target.array() - ybar).matrix().cwiseAbs2());
    fit.map.intercept = beta(0);
    fit.map.weights.assign(beta.data() + 1, beta.data() + 1 + k);
    const bool constant = target.maxCoeff() == target.minCoeff();
    fit.map.fit_quality = constant || !(ss_tot > 0.0) ? 1.0 : std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
    return fit;
}

}  // namespace

SegmentMask segment(const RawImage& img, int n) {
    if (n < 1) throw ConstraintError(fmt::format("segment count {} must be positive", n));
    if (img.empty()) throw ConstraintError("cannot segment an empty image");
    int side = 1;
    while (side * side < n) ++side;
    SegmentMask m;
    m.height = img.height;
    m.width = img.width;
    m.cell_height = ceil_div(img.height, side);
    m.cell_width = ceil_div(img.width, side);
    m.rows = ceil_div(img.height, m.cell_height);
    m.cols = ceil_div(img.width, m.cell_width);
    m.n_segments = m.rows * m.cols;
    m.ids.resize(static_cast<size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            m.ids[static_cast<size_t>(y) * img.width + x] = (y / m.cell_height) * m.cols + x / m.cell_width;
        }
    }
    return m;
}

std::array<uint8_t, 3> mean_color(const RawImage& img) {
    std::array<double, 3> sum{};
    for (size_t i = 0; i < img.pixels.size(); ++i) sum[i % 3] += img.pixels[i];
    const double count = static_cast<double>(img.pixels.size() / 3);
    std::array<uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) out[c] = static_cast<uint8_t>(std::nearbyint(sum[c] / count));
    return out;
}

RawImage perturb(const RawImage& img, const SegmentMask& mask, const std::vector<uint8_t>& on, std::array<uint8_t, 3> fill) {
    RawImage out = img;
    for (size_t p = 0; p < mask.ids.size(); ++p) {
        if (on[static_cast<size_t>(mask.ids[p])]) continue;
        for (size_t c = 0; c < 3; ++c) out.pixels[p * 3 + c] = fill[c];
    }
    return out;
}

SaliencyMap explain(const RawImage& img, const SegmentMask& mask, const ImageScorer& scorer, const ExplainOptions& options) {
    if (mask.height != img.height || mask.width != img.width) throw ConstraintError("segment mask does not match the image size");
    const int k = mask.n_segments;
    if (options.n_samples < k + 2) {
        throw ConstraintError(fmt::format("{} samples cannot fit {} segments (need at least {})", options.n_samples, k, k + 2));
    }
    if (!(options.ridge >= 0.0)) throw ConstraintError("ridge strength must be non-negative");
    const double width = options.kernel_width > 0.0 ? options.kernel_width : 0.25 * std::sqrt(static_cast<double>(k));
    const auto fill = mean_color(img);
    for (uint64_t seed : {options.seed, options.seed + 1}) {
        const auto z = draw_samples(options.n_samples, k, seed);
        std::vector<double> y(z.size());
        parallel_for(z.size(), options.threads, [&](size_t i) { y[i] = scorer(perturb(img, mask, z[i], fill)); });
        Fit fit = fit_surrogate(z, y, width, options.ridge);
        if (fit.full_rank) {
            fit.map.seed = seed;
            return fit.map;
        }
    }
    throw SingularFitError(fmt::format("perturbation design is rank deficient for seeds {} and {}", options.seed, options.seed + 1));
}

SaliencyMap explain(const RawImage& img, const PromptPair& pair, const EmbeddingModel& model, const SegmentMask& mask,
                    const ExplainOptions& options) {
    const PromptEmbeddings texts = embed_prompt(pair, model);
    const PreprocessSpec spec = model.config().preprocess();
    const double scale = model.config().logit_scale;
    return explain(img, mask, [&](const RawImage& perturbed) {
        return score(model.encode_image(preprocess(perturbed, spec)), pair, texts, scale).p_morph;
    }, options);
}

RawImage saliency_overlay(const RawImage& img, const SegmentMask& mask, const SaliencyMap& map) {
    double peak = 0.0;
    for (double w : map.weights) peak = std::max(peak, std::fabs(w));
    RawImage out = img;
    if (peak <= 0.0) return out;
    for (size_t p = 0; p < mask.ids.size(); ++p) {
        const double w = map.weights[static_cast<size_t>(mask.ids[p])] / peak;
        const double alpha = 0.6 * std::fabs(w);
        const std::array<double, 3> tint = w > 0 ? std::array<double, 3>{255, 0, 0} : std::array<double, 3>{0, 0, 255};
        for (size_t c = 0; c < 3; ++c) {
            const double v = (1.0 - alpha) * img.pixels[p * 3 + c] + alpha * tint[c];
            out.pixels[p * 3 + c] = static_cast<uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
        }
    }
    return out;
}

std::string saliency_to_json(const SaliencyMap& map, const SegmentMask& mask, const ExplainOptions& options,
                             const std::string& prompt_id) {
    nlohmann::ordered_json doc;
    doc["prompt_id"] = prompt_id;
    doc["grid"] = {{"rows", mask.rows}, {"cols", mask.cols}, {"cell_height", mask.cell_height},
                   {"cell_width", mask.cell_width}, {"image_height", mask.height}, {"image_width", mask.width}};
    doc["n_segments"] = mask.n_segments;
    doc["weights"] = map.weights;
    doc["intercept"] = map.intercept;
    doc["fit_quality"] = map.fit_quality;
    doc["n_samples"] = options.n_samples;
    doc["seed"] = map.seed;
    doc["kernel_width"] = options.kernel_width > 0.0 ? options.kernel_width : 0.25 * std::sqrt(static_cast<double>(mask.n_segments));
    doc["ridge"] = options.ridge;
    return doc.dump(2) + "\n";
}

}  // namespace zsmad
