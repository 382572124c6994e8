#include "zsmad/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"
#include "zsmad/graph/session.hpp"
#include "zsmad/parallel.hpp"

namespace zsmad {

Backbone Backbone::load(const std::filesystem::path& graph_path) {
    auto sidecar = graph_path;
    sidecar.replace_extension(".json");
    if (!std::filesystem::is_regular_file(graph_path)) throw BundleError("backbone graph " + graph_path.string() + " not found");
    if (!std::filesystem::is_regular_file(sidecar)) throw BundleError("backbone sidecar " + sidecar.string() + " not found");
    Backbone b;
    b.path_ = graph_path;
    try {
        const auto doc = nlohmann::json::parse(detail::read_file(sidecar));
        b.name_ = doc.at("name").get<std::string>();
        b.spec_.target_size = doc.at("input_size").get<int>();
        b.spec_.channel_mean = doc.at("channel_mean").get<std::array<float, 3>>();
        b.spec_.channel_std = doc.at("channel_std").get<std::array<float, 3>>();
        b.spec_.validate();
    } catch (const nlohmann::json::exception& e) {
        throw BundleError(fmt::format("{}: {}", sidecar.filename().string(), e.what()));
    } catch (const ConstraintError& e) {
        throw BundleError(fmt::format("{}: {}", sidecar.filename().string(), e.what()));
    }
    try {
        b.session_ = std::make_shared<const graph::Session>(graph::Session::load(graph_path));
    } catch (const graph::GraphError& e) {
        throw BundleError(fmt::format("{}: {}", graph_path.filename().string(), e.what()));
    }
    if (b.session_->inputs().size() != 1 || b.session_->outputs().size() != 1) {
        throw BundleError(fmt::format("backbone {} must have one input and one output", b.name_));
    }
    return b;
}

Embedding Backbone::features(const ImageTensor& tensor) const {
    const int s = spec_.target_size;
    if (tensor.size != s) throw InferenceError(fmt::format("backbone {} expects {}x{} input", name_, s, s));
    std::vector<graph::Tensor> out;
    try {
        out = session_->run(std::vector<graph::Tensor>{graph::Tensor::floats({1, 3, s, s}, tensor.data)});
    } catch (const graph::GraphError& e) {
        throw InferenceError(fmt::format("backbone {}: {}", name_, e.what()));
    }
    const auto& y = out.at(0);
    if (!graph::is_floating(y.dtype()) || y.size() == 0) throw InferenceError(fmt::format("backbone {} produced no features", name_));
    return normalize(y.float_data());
}

PrototypeScorer fit_prototype(std::string name, std::span<const Embedding> embeddings, std::vector<std::string> ids) {
    if (embeddings.empty()) throw EmptyReferenceError("reference set is empty");
    const size_t d = embeddings.front().size();
    std::vector<double> mean(d, 0.0);
    for (const auto& e : embeddings) {
        if (e.size() != d) throw ConstraintError("reference embeddings differ in width");
        const Embedding unit = normalize(e);
        for (size_t i = 0; i < d; ++i) mean[i] += unit[i];
    }
    double sq = 0.0;
    for (double& m : mean) {
        m /= static_cast<double>(embeddings.size());
        sq += m * m;
    }
    const double norm = std::sqrt(sq);
    if (!(norm > 1e-12)) throw DegenerateError("reference embeddings cancel out; the prototype direction is undefined");
    PrototypeScorer s;
    s.name = std::move(name);
    s.prototype.resize(d);
    for (size_t i = 0; i < d; ++i) s.prototype[i] = static_cast<float>(mean[i] / norm);
    s.ref_count = embeddings.size();
    s.reference_ids = std::move(ids);
    return s;
}

PrototypeScorer fit_prototype(const Backbone& backbone, const Manifest& reference, int threads) {
    if (reference.samples.empty()) throw EmptyReferenceError("reference manifest is empty");
    for (const auto& s : reference.samples) {
        if (s.label != Label::BonaFide) throw ConstraintError(fmt::format("reference sample '{}' is not bona fide", s.id));
    }
    std::vector<Embedding> embeddings(reference.samples.size());
    parallel_for(reference.samples.size(), threads, [&](size_t i) {
        const auto& s = reference.samples[i];
        embeddings[i] = backbone.features(preprocess(decode(reference.resolve(s)), backbone.spec()));
    });
    std::vector<std::string> ids;
    for (const auto& s : reference.samples) ids.push_back(s.id);
    auto scorer = fit_prototype(backbone.name(), embeddings, std::move(ids));
    scorer.backbone = backbone.path();
    return scorer;
}

double prototype_score(const PrototypeScorer& scorer, const Embedding& embedding) {
    const double cos = dot(normalize(embedding), scorer.prototype);
    return std::clamp((1.0 - cos) / 2.0, 0.0, 1.0);
}

double baseline_score(const PrototypeScorer& scorer, const Backbone& backbone, const ImageTensor& img) {
    return prototype_score(scorer, backbone.features(img));
}

std::string scorer_to_json(const PrototypeScorer& s) {
    nlohmann::ordered_json doc;
    doc["name"] = s.name;
    doc["backbone"] = s.backbone.generic_string();
    doc["ref_count"] = s.ref_count;
    doc["prototype"] = s.prototype;
    doc["reference_ids"] = s.reference_ids;
    return doc.dump(2) + "\n";
}

PrototypeScorer scorer_from_json(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        PrototypeScorer s;
        s.name = doc.at("name").get<std::string>();
        s.backbone = doc.at("backbone").get<std::string>();
        s.ref_count = doc.at("ref_count").get<size_t>();
        s.prototype = doc.at("prototype").get<Embedding>();
        if (doc.contains("reference_ids")) s.reference_ids = doc.at("reference_ids").get<std::vector<std::string>>();
        if (s.ref_count < 1) throw ConstraintError("scorer state has ref_count 0");
        if (std::fabs(std::sqrt(dot(s.prototype, s.prototype)) - 1.0) > 1e-5) throw ConstraintError("scorer prototype is not unit length");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scorer state: ") + e.what());
    }
}

void check_disjoint(const PrototypeScorer& scorer, const Manifest& evaluation) {
    const std::unordered_set<std::string> refs(scorer.reference_ids.begin(), scorer.reference_ids.end());
    for (const auto& s : evaluation.samples) {
        if (refs.contains(s.id)) {
            throw ConstraintError(fmt::format("sample '{}' is in both the {} reference set and the evaluation manifest", s.id, scorer.name));
        }
    }
}

}  // namespace zsmad
