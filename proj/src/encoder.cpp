#include "zsmad/encoder.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/graph/session.hpp"

namespace zsmad {

namespace {

using graph::DataType;
using graph::Session;
using graph::Tensor;

const std::set<std::string> kConfigKeys = {"embed_dim", "image_size", "context_length", "logit_scale",
                                           "channel_mean", "channel_std", "opset"};

std::array<float, 3> triple(const nlohmann::json& doc, const char* key) {
    const auto& v = doc.at(key);
    if (!v.is_array() || v.size() != 3) throw BundleError(fmt::format("config '{}' must hold 3 numbers", key));
    std::array<float, 3> out{};
    for (size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number()) throw BundleError(fmt::format("config '{}' must hold 3 numbers", key));
        out[i] = v[i].get<float>();
    }
    return out;
}

// Shortest decimal that round-trips the float, so 0.5f-style constants stay readable.
nlohmann::ordered_json short_floats(const std::array<float, 3>& v) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (float f : v) out.push_back(std::stod(fmt::format("{}", f)));
    return out;
}

int positive_int(const nlohmann::json& doc, const char* key) {
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<int64_t>() <= 0 || v.get<int64_t>() > (1 << 20)) {
        throw BundleError(fmt::format("config '{}' must be a positive integer", key));
    }
    return v.get<int>();
}

// [N, width] rows to normalised embeddings.
std::vector<Embedding> rows_of(const Tensor& out, int width, const char* which) {
    if (out.rank() != 2 || out.dim(1) != width || !graph::is_floating(out.dtype())) {
        throw InferenceError(fmt::format("{} encoder produced {} {}, expected [N, {}] floats", which,
                                         graph::to_string(out.dtype()), graph::shape_string(out.shape()), width));
    }
    std::vector<Embedding> rows;
    const auto data = out.float_data();
    for (int64_t r = 0; r < out.dim(0); ++r) {
        rows.push_back(normalize(data.subspan(static_cast<size_t>(r * width), static_cast<size_t>(width))));
    }
    return rows;
}

std::vector<Tensor> invoke(const Session& s, Tensor feed, const char* which) {
    try {
        return s.run(std::vector<Tensor>{std::move(feed)});
    } catch (const graph::GraphError& e) {
        throw InferenceError(fmt::format("{} encoder: {}", which, e.what()));
    }
}

Session load_graph(const std::filesystem::path& path) {
    try {
        return Session::load(path);
    } catch (const graph::GraphError& e) {
        throw BundleError(fmt::format("{}: {}", path.filename().string(), e.what()));
    }
}

// Checks the single-input, single-output signature. Returns whether the
// batch dimension is free.
bool check_signature(const Session& s, const char* which, bool integer_input, const std::vector<int64_t>& trailing,
                     int embed_dim) {
    if (s.inputs().size() != 1 || s.outputs().size() != 1) {
        throw BundleError(fmt::format("{} encoder must have one input and one output (has {} and {})", which,
                                      s.inputs().size(), s.outputs().size()));
    }
    const auto& in = s.inputs()[0];
    if (graph::is_floating(in.dtype) == integer_input) {
        throw BundleError(fmt::format("{} encoder input has type {}", which, graph::to_string(in.dtype)));
    }
    if (in.dims.size() != trailing.size() + 1) {
        throw BundleError(fmt::format("{} encoder input has rank {}, expected {}", which, in.dims.size(), trailing.size() + 1));
    }
    for (size_t i = 0; i < trailing.size(); ++i) {
        if (in.dims[i + 1] && *in.dims[i + 1] != trailing[i]) {
            throw BundleError(fmt::format("{} encoder input dim {} is {}, config implies {}", which, i + 1, *in.dims[i + 1],
                                          trailing[i]));
        }
    }
    const auto& out = s.outputs()[0];
    if (out.dims.size() == 2 && out.dims[1] && *out.dims[1] != embed_dim) {
        throw BundleError(fmt::format("{} encoder output width {} differs from embed_dim {}", which, *out.dims[1], embed_dim));
    }
    return !in.dims[0].has_value() || *in.dims[0] != 1;
}

}  // namespace

Embedding normalize(std::span<const float> v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw InferenceError("cannot normalise a zero or non-finite vector");
    Embedding out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
    return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ConstraintError(fmt::format("dot of vectors with sizes {} and {}", a.size(), b.size()));
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

PreprocessSpec BundleConfig::preprocess() const {
    PreprocessSpec spec;
    spec.target_size = image_size;
    spec.channel_mean = channel_mean;
    spec.channel_std = channel_std;
    return spec;
}

std::string BundleConfig::to_json() const {
    nlohmann::ordered_json doc;
    doc["embed_dim"] = embed_dim;
    doc["image_size"] = image_size;
    doc["context_length"] = context_length;
    doc["logit_scale"] = logit_scale;
    doc["channel_mean"] = short_floats(channel_mean);
    doc["channel_std"] = short_floats(channel_std);
    if (opset) doc["opset"] = *opset;
    return doc.dump(2) + "\n";
}

BundleConfig BundleConfig::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw BundleError(std::string("config.json: ") + e.what());
    }
    if (!doc.is_object()) throw BundleError("config.json must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (!kConfigKeys.contains(key)) throw BundleError(fmt::format("config.json: unknown key '{}'", key));
    }
    for (const char* key : {"embed_dim", "image_size", "context_length", "logit_scale", "channel_mean", "channel_std"}) {
        if (!doc.contains(key)) throw BundleError(fmt::format("config.json: missing key '{}'", key));
    }
    BundleConfig c;
    c.embed_dim = positive_int(doc, "embed_dim");
    c.image_size = positive_int(doc, "image_size");
    c.context_length = positive_int(doc, "context_length");
    if (c.context_length < 2) throw BundleError("config 'context_length' must be at least 2");
    if (!doc.at("logit_scale").is_number()) throw BundleError("config 'logit_scale' must be a number");
    c.logit_scale = doc.at("logit_scale").get<double>();
    if (!(c.logit_scale > 0.0) || !std::isfinite(c.logit_scale)) {
        throw BundleError(fmt::format("config 'logit_scale' {} must be positive and finite", c.logit_scale));
    }
    c.channel_mean = triple(doc, "channel_mean");
    c.channel_std = triple(doc, "channel_std");
    for (float s : c.channel_std) {
        if (!(s > 0.f) || !std::isfinite(s)) throw BundleError("config 'channel_std' components must be positive");
    }
    if (doc.contains("opset")) c.opset = positive_int(doc, "opset");
    return c;
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
    std::vector<std::string> missing;
    for (const char* f : kBundleFiles) {
        if (!std::filesystem::is_regular_file(dir / f)) missing.emplace_back(f);
    }
    if (!missing.empty()) {
        throw BundleError(fmt::format("bundle {} lacks {}", dir.string(), fmt::join(missing, ", ")));
    }
    ModelBundle b;
    b.dir_ = dir;
    b.config_ = BundleConfig::from_json(detail::read_file(dir / "config.json"));
    const auto& c = b.config_;
    b.vocab_ = std::make_shared<const Vocabulary>(load_vocab(dir / "vocab.json", dir / "merges.txt", c.context_length));
    b.image_ = std::make_shared<const Session>(load_graph(dir / "image_encoder.onnx"));
    b.text_ = std::make_shared<const Session>(load_graph(dir / "text_encoder.onnx"));
    b.image_batch_ = check_signature(*b.image_, "image", false, {3, c.image_size, c.image_size}, c.embed_dim);
    b.text_batch_ = check_signature(*b.text_, "text", true, {c.context_length}, c.embed_dim);
    if (c.opset) {
        for (const auto* s : {b.image_.get(), b.text_.get()}) {
            if (s->opset() != *c.opset) throw BundleError(fmt::format("graph opset {} differs from config opset {}", s->opset(), *c.opset));
        }
    }
    // Probe both graphs once so a width mismatch surfaces at load time.
    try {
        ImageTensor probe{c.image_size, std::vector<float>(static_cast<size_t>(3) * c.image_size * c.image_size, 0.f)};
        b.encode_image(probe);
        b.encode_text(tokenize("", *b.vocab_));
    } catch (const InferenceError& e) {
        throw BundleError(fmt::format("bundle {} failed its probe run: {}", dir.string(), e.what()));
    }
    return b;
}

Embedding ModelBundle::encode_image(const ImageTensor& tensor) const { return encode_images(std::span(&tensor, 1)).front(); }

Embedding ModelBundle::encode_text(const TokenSequence& tokens) const { return encode_texts(std::span(&tokens, 1)).front(); }

std::vector<Embedding> ModelBundle::encode_images(std::span<const ImageTensor> tensors) const {
    const int s = config_.image_size;
    const size_t per = static_cast<size_t>(3) * s * s;
    for (const auto& t : tensors) {
        if (t.size != s || t.data.size() != per) {
            throw InferenceError(fmt::format("image tensor is {}x{}, bundle expects {}x{}", t.size, t.size, s, s));
        }
    }
    if (tensors.empty()) return {};
    if (!image_batch_ && tensors.size() > 1) {
        std::vector<Embedding> out;
        for (const auto& t : tensors) out.push_back(encode_image(t));
        return out;
    }
    std::vector<float> data;
    data.reserve(per * tensors.size());
    for (const auto& t : tensors) data.insert(data.end(), t.data.begin(), t.data.end());
    const auto n = static_cast<int64_t>(tensors.size());
    auto out = invoke(*image_, Tensor::floats({n, 3, s, s}, std::move(data)), "image");
    auto rows = rows_of(out.at(0), config_.embed_dim, "image");
    if (rows.size() != tensors.size()) throw InferenceError("image encoder changed the batch size");
    return rows;
}

std::vector<Embedding> ModelBundle::encode_texts(std::span<const TokenSequence> tokens) const {
    const auto len = static_cast<size_t>(config_.context_length);
    for (const auto& t : tokens) {
        if (t.ids.size() != len) throw InferenceError(fmt::format("token sequence has {} slots, bundle expects {}", t.ids.size(), len));
    }
    if (tokens.empty()) return {};
    if (!text_batch_ && tokens.size() > 1) {
        std::vector<Embedding> out;
        for (const auto& t : tokens) out.push_back(encode_text(t));
        return out;
    }
    std::vector<int64_t> ids;
    ids.reserve(len * tokens.size());
    for (const auto& t : tokens) ids.insert(ids.end(), t.ids.begin(), t.ids.end());
    const auto n = static_cast<int64_t>(tokens.size());
    auto out = invoke(*text_, Tensor::ints(text_->inputs()[0].dtype, {n, static_cast<int64_t>(len)}, std::move(ids)), "text");
    auto rows = rows_of(out.at(0), config_.embed_dim, "text");
    if (rows.size() != tokens.size()) throw InferenceError("text encoder changed the batch size");
    return rows;
}

}  // namespace zsmad
