#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zsmad/encoder.hpp"

namespace zsmad {

inline constexpr int kToyImageSize = 32;
inline constexpr int kToyMerges = 256;
inline constexpr double kToyLogitScale = 10.0;
inline constexpr int kToyFeatureDim = 32;

// Parameters of the toy encoders, row-major.
//   image: embedding = flatten(pixels) . image_w + image_b   image_w: [3*S*S, D]
//   text:  embedding = mean(token_table[id] for id > 0) . text_proj
struct ToyWeights {
    int embed_dim = 0;
    int vocab_size = 0;
    int image_size = kToyImageSize;
    std::vector<float> image_w;
    std::vector<float> image_b;
    std::vector<float> token_table;  // [vocab_size, D]
    std::vector<float> text_proj;    // [D, D]
};

// Uniform draws from the top 24 bits of mt19937_64 output, so weights are
// identical on every platform.
ToyWeights toy_weights(uint64_t seed, int embed_dim, int vocab_size);

// BPE vocabulary learned from the default prompt bank.
Vocabulary toy_vocabulary();

// Writes a complete bundle to out_dir and loads it. Same seed and dim give
// byte-identical files. Throws ConstraintError (dim < 2) or IoError.
ModelBundle make_toy_bundle(uint64_t seed, int embed_dim, const std::filesystem::path& out_dir);

// Three small convolutional feature extractors named after the image-only
// model families they stand in for. Each is <name>.onnx plus a <name>.json
// preprocessing sidecar. Returns the graph paths.
std::vector<std::filesystem::path> make_toy_backbones(uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace zsmad
