#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsmad/imaging.hpp"
#include "zsmad/tokenizer.hpp"

namespace zsmad {

namespace graph {
class Session;
}

// A point in the shared image-text space; unit length once normalised.
using Embedding = std::vector<float>;

// Throws InferenceError on a zero or non-finite vector.
Embedding normalize(std::span<const float> v);

// Accumulates in double.
double dot(std::span<const float> a, std::span<const float> b);

struct BundleConfig {
    int embed_dim = 0;
    int image_size = 0;
    int context_length = 77;
    double logit_scale = 100.0;
    std::array<float, 3> channel_mean{};
    std::array<float, 3> channel_std{};
    std::optional<int> opset;  // when present, must match both graphs

    // Shorter-side resize with centre crop, bicubic.
    PreprocessSpec preprocess() const;
    std::string to_json() const;
    // Throws BundleError on missing, unknown or out-of-range keys.
    static BundleConfig from_json(const std::string& text);
};

// What the scoring pipeline needs from a dual encoder. Implementations must
// be safe to call concurrently.
class EmbeddingModel {
public:
    virtual ~EmbeddingModel() = default;
    virtual const BundleConfig& config() const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual Embedding encode_image(const ImageTensor& tensor) const = 0;
    virtual Embedding encode_text(const TokenSequence& tokens) const = 0;
};

inline constexpr const char* kBundleFiles[] = {"config.json", "image_encoder.onnx", "text_encoder.onnx", "vocab.json",
                                               "merges.txt"};

// Directory with config.json, image_encoder.onnx, text_encoder.onnx,
// vocab.json and merges.txt. Sessions are stateless and shared across threads.
class ModelBundle final : public EmbeddingModel {
public:
    // Throws BundleError (missing file, bad config, graph signature or width
    // mismatch) or VocabError.
    static ModelBundle load(const std::filesystem::path& dir);

    const BundleConfig& config() const override { return config_; }
    const Vocabulary& vocab() const override { return *vocab_; }
    const std::filesystem::path& dir() const { return dir_; }

    // Forward pass then L2 normalisation. Throws InferenceError.
    Embedding encode_image(const ImageTensor& tensor) const override;
    Embedding encode_text(const TokenSequence& tokens) const override;

    // One graph call for the whole batch; row i matches encode_*(items[i]).
    std::vector<Embedding> encode_images(std::span<const ImageTensor> tensors) const;
    std::vector<Embedding> encode_texts(std::span<const TokenSequence> tokens) const;

private:
    ModelBundle() = default;

    std::filesystem::path dir_;
    BundleConfig config_;
    std::shared_ptr<const Vocabulary> vocab_;
    std::shared_ptr<const graph::Session> image_;
    std::shared_ptr<const graph::Session> text_;
    bool image_batch_ = true;
    bool text_batch_ = true;
};

inline ModelBundle load_bundle(const std::filesystem::path& dir) { return ModelBundle::load(dir); }

}  // namespace zsmad
