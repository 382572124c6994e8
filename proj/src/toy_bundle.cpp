#include "zsmad/toy_bundle.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/classifier.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/graph/builder.hpp"

namespace zsmad {

namespace {

using graph::DataType;
using graph::ModelBuilder;
using graph::Tensor;

constexpr std::array<float, 3> kMean = {0.48145466f, 0.4578275f, 0.40821073f};
constexpr std::array<float, 3> kStd = {0.26862954f, 0.26130258f, 0.27577711f};
constexpr int64_t kOpset = 17;

class UniformBits {
public:
    explicit UniformBits(uint64_t seed) : rng_(seed) {}
    // Uniform in [-scale, scale).
    std::vector<float> draw(size_t n, double scale) {
        std::vector<float> out(n);
        for (auto& v : out) {
            const double u = static_cast<double>(rng_() >> 40) * 0x1p-24;
            v = static_cast<float>((2.0 * u - 1.0) * scale);
        }
        return out;
    }

private:
    std::mt19937_64 rng_;
};

void write_bytes(const std::filesystem::path& p, const std::string& bytes) { detail::write_file(p, bytes); }

std::string image_graph(const ToyWeights& w) {
    const int64_t k = 3LL * w.image_size * w.image_size;
    const int64_t d = w.embed_dim;
    ModelBuilder b("toy_image_encoder", kOpset);
    b.add_input("pixels", DataType::Float, {"N", 3, w.image_size, w.image_size});
    b.add_output("embedding", DataType::Float, {"N", d});
    b.add_initializer("W", Tensor::floats({k, d}, w.image_w));
    b.add_initializer("b", Tensor::floats({d}, w.image_b));
    b.add_node("Flatten", {"pixels"}, {"flat"}, {{"axis", int64_t{1}}});
    b.add_node("MatMul", {"flat", "W"}, {"proj"});
    b.add_node("Add", {"proj", "b"}, {"embedding"});
    return b.serialize();
}

std::string text_graph(const ToyWeights& w, int context_length) {
    const int64_t d = w.embed_dim;
    ModelBuilder b("toy_text_encoder", kOpset);
    b.add_input("input_ids", DataType::Int64, {"N", context_length});
    b.add_output("embedding", DataType::Float, {"N", d});
    b.add_initializer("table", Tensor::floats({w.vocab_size, d}, w.token_table));
    b.add_initializer("proj", Tensor::floats({d, d}, w.text_proj));
    b.add_initializer("zero", Tensor::ints(DataType::Int64, {}, {0}));
    b.add_initializer("axis1", Tensor::ints(DataType::Int64, {1}, {1}));
    b.add_initializer("axis2", Tensor::ints(DataType::Int64, {1}, {2}));
    b.add_node("Gather", {"table", "input_ids"}, {"tokens"}, {{"axis", int64_t{0}}});
    b.add_node("Greater", {"input_ids", "zero"}, {"is_token"});
    b.add_node("Cast", {"is_token"}, {"mask"}, {{"to", int64_t{1}}});
    b.add_node("Unsqueeze", {"mask", "axis2"}, {"mask3"});
    b.add_node("Mul", {"tokens", "mask3"}, {"masked"});
    b.add_node("ReduceSum", {"masked", "axis1"}, {"summed"}, {{"keepdims", int64_t{0}}});
    b.add_node("ReduceSum", {"mask", "axis1"}, {"count"}, {{"keepdims", int64_t{1}}});
    b.add_node("Div", {"summed", "count"}, {"pooled"});
    b.add_node("MatMul", {"pooled", "proj"}, {"embedding"});
    return b.serialize();
}

std::string backbone_graph(uint64_t seed, const std::string& name) {
    constexpr int64_t channels = 8, kernel = 4, size = kToyImageSize, grid = size / kernel;
    constexpr int64_t flat = channels * grid * grid;
    UniformBits rng(seed);
    const auto conv_w = rng.draw(static_cast<size_t>(channels * 3 * kernel * kernel), 1.0 / std::sqrt(3.0 * kernel * kernel));
    const auto conv_b = rng.draw(static_cast<size_t>(channels), 0.1);
    const auto fc = rng.draw(static_cast<size_t>(flat * kToyFeatureDim), 1.0 / std::sqrt(static_cast<double>(flat)));
    ModelBuilder b(name, kOpset);
    b.add_input("pixels", DataType::Float, {"N", 3, size, size});
    b.add_output("features", DataType::Float, {"N", kToyFeatureDim});
    b.add_initializer("conv_w", Tensor::floats({channels, 3, kernel, kernel}, conv_w));
    b.add_initializer("conv_b", Tensor::floats({channels}, conv_b));
    b.add_initializer("fc", Tensor::floats({flat, kToyFeatureDim}, fc));
    b.add_node("Conv", {"pixels", "conv_w", "conv_b"}, {"conv"},
               {{"kernel_shape", std::vector<int64_t>{kernel, kernel}}, {"strides", std::vector<int64_t>{kernel, kernel}}});
    b.add_node("Relu", {"conv"}, {"act"});
    b.add_node("Flatten", {"act"}, {"flat"}, {{"axis", int64_t{1}}});
    b.add_node("MatMul", {"flat", "fc"}, {"features"});
    return b.serialize();
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

}  // namespace

ToyWeights toy_weights(uint64_t seed, int embed_dim, int vocab_size) {
    if (embed_dim < 2) throw ConstraintError(fmt::format("toy embed_dim {} must be at least 2", embed_dim));
    ToyWeights w;
    w.embed_dim = embed_dim;
    w.vocab_size = vocab_size;
    const auto d = static_cast<size_t>(embed_dim);
    const size_t k = 3ULL * w.image_size * w.image_size;
    UniformBits rng(seed);
    w.image_w = rng.draw(k * d, 1.0 / std::sqrt(static_cast<double>(k)));
    w.image_b = rng.draw(d, 0.1);
    w.token_table = rng.draw(static_cast<size_t>(vocab_size) * d, 1.0);
    w.text_proj = rng.draw(d * d, 1.0 / std::sqrt(static_cast<double>(d)));
    return w;
}

Vocabulary toy_vocabulary() {
    std::vector<std::string> corpus;
    for (const auto& p : default_prompt_bank().pairs) {
        corpus.push_back(p.bonafide_text);
        corpus.push_back(p.morph_text);
    }
    return Vocabulary::from_merges(learn_merges(corpus, kToyMerges));
}

ModelBundle make_toy_bundle(uint64_t seed, int embed_dim, const std::filesystem::path& out_dir) {
    const Vocabulary vocab = toy_vocabulary();
    const ToyWeights w = toy_weights(seed, embed_dim, static_cast<int>(vocab.size()));
    ensure_dir(out_dir);
    BundleConfig c;
    c.embed_dim = embed_dim;
    c.image_size = w.image_size;
    c.context_length = vocab.context_length();
    c.logit_scale = kToyLogitScale;
    c.channel_mean = kMean;
    c.channel_std = kStd;
    c.opset = static_cast<int>(kOpset);
    write_bytes(out_dir / "config.json", c.to_json());
    write_bytes(out_dir / "image_encoder.onnx", image_graph(w));
    write_bytes(out_dir / "text_encoder.onnx", text_graph(w, c.context_length));
    vocab.save(out_dir / "vocab.json", out_dir / "merges.txt");
    return ModelBundle::load(out_dir);
}

std::vector<std::filesystem::path> make_toy_backbones(uint64_t seed, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    std::vector<std::filesystem::path> paths;
    const std::array<std::string, 3> names = {"resnet50", "vgg19", "vit"};
    for (size_t i = 0; i < names.size(); ++i) {
        const auto path = out_dir / (names[i] + ".onnx");
        write_bytes(path, backbone_graph(seed * 1000 + i + 1, names[i]));
        nlohmann::ordered_json side;
        side["name"] = names[i];
        side["input_size"] = kToyImageSize;
        side["channel_mean"] = {0.48145466, 0.4578275, 0.40821073};
        side["channel_std"] = {0.26862954, 0.26130258, 0.27577711};
        write_bytes(out_dir / (names[i] + ".json"), side.dump(2) + "\n");
        paths.push_back(path);
    }
    return paths;
}

}  // namespace zsmad
