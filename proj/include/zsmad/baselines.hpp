#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zsmad/encoder.hpp"
#include "zsmad/manifest.hpp"

namespace zsmad {

namespace graph {
class Session;
}

// Image-only feature extractor: <name>.onnx with one float input
// [N, 3, S, S] and one [N, F] output, plus a <name>.json sidecar holding
// {name, input_size, channel_mean, channel_std}.
class Backbone {
public:
    // Throws BundleError.
    static Backbone load(const std::filesystem::path& graph_path);

    const std::string& name() const { return name_; }
    const std::filesystem::path& path() const { return path_; }
    const PreprocessSpec& spec() const { return spec_; }

    // Normalised features. Throws InferenceError.
    Embedding features(const ImageTensor& tensor) const;

private:
    Backbone() = default;
    std::string name_;
    std::filesystem::path path_;
    PreprocessSpec spec_;
    std::shared_ptr<const graph::Session> session_;
};

struct PrototypeScorer {
    std::string name;
    std::filesystem::path backbone;
    Embedding prototype;  // unit length
    std::size_t ref_count = 0;
    std::vector<std::string> reference_ids;
    bool operator==(const PrototypeScorer&) const = default;
};

// Normalised mean of the normalised embeddings. Throws EmptyReferenceError
// and DegenerateError (mean of zero length).
PrototypeScorer fit_prototype(std::string name, std::span<const Embedding> embeddings, std::vector<std::string> ids = {});

// Reference samples must all be bona fide (ConstraintError) and loadable.
PrototypeScorer fit_prototype(const Backbone& backbone, const Manifest& reference, int threads = 1);

// (1 - cos) / 2, clamped to [0, 1].
double prototype_score(const PrototypeScorer& scorer, const Embedding& embedding);
double baseline_score(const PrototypeScorer& scorer, const Backbone& backbone, const ImageTensor& img);

std::string scorer_to_json(const PrototypeScorer& scorer);
PrototypeScorer scorer_from_json(const std::string& text);

// A fitted scorer together with its feature extractor.
struct Baseline {
    Backbone backbone;
    PrototypeScorer scorer;
};

// Throws ConstraintError when the reference and evaluation sets share an id.
void check_disjoint(const PrototypeScorer& scorer, const Manifest& evaluation);

}  // namespace zsmad
