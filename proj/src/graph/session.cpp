#include "zsmad/graph/session.hpp"

#include <climits>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <google/protobuf/io/coded_stream.h>
#include <google/protobuf/io/zero_copy_stream_impl_lite.h>

#include "node.hpp"
#include "proto_convert.hpp"

namespace zsmad::graph {

namespace detail {

int64_t Node::attr_int(const std::string& key, int64_t fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second.i;
}

float Node::attr_float(const std::string& key, float fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second.f;
}

std::string Node::attr_string(const std::string& key, const std::string& fallback) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? fallback : it->second.s;
}

std::optional<std::vector<int64_t>> Node::attr_ints(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    return it->second.ints;
}

const Tensor* Node::attr_tensor(const std::string& key) const {
    auto it = attrs.find(key);
    return it == attrs.end() || it->second.kind != Attribute::Kind::Tensor ? nullptr : &it->second.t;
}

const Registry& registry() {
    static const Registry r = [] {
        Registry reg;
        register_elementwise_ops(reg);
        register_shape_ops(reg);
        register_nn_ops(reg);
        return reg;
    }();
    return r;
}

const Tensor& input(Inputs in, size_t i, const Node& node) {
    if (i >= in.size() || in[i] == nullptr) {
        throw GraphError(fmt::format("{} is missing required input #{}", node.op_type, i));
    }
    return *in[i];
}

const Tensor* optional_input(Inputs in, size_t i) {
    return i < in.size() ? in[i] : nullptr;
}

}  // namespace detail

struct Session::Impl {
    std::vector<ValueInfo> inputs;
    std::vector<ValueInfo> outputs;
    std::vector<int> input_slots;
    std::vector<int> output_slots;
    int n_slots = 0;
    std::vector<Tensor> constants;
    std::vector<int> constant_of_slot;  // index into constants or -1
    std::vector<detail::Node> nodes;
    std::vector<detail::OpFn> fns;
    std::vector<std::vector<int>> release_after;
    int64_t opset = 0;
};

namespace {

ValueInfo value_info(const onnx::ValueInfoProto& vi) {
    ValueInfo out;
    out.name = vi.name();
    if (vi.type().has_tensor_type()) {
        const auto& tt = vi.type().tensor_type();
        out.dtype = detail::from_onnx_type(tt.elem_type());
        for (const auto& d : tt.shape().dim()) {
            if (d.has_dim_value()) out.dims.emplace_back(d.dim_value());
            else out.dims.emplace_back(std::nullopt);
        }
    }
    return out;
}

detail::Attribute convert_attribute(const onnx::AttributeProto& a, const std::filesystem::path& base_dir) {
    using Kind = detail::Attribute::Kind;
    detail::Attribute out;
    switch (a.type()) {
        case onnx::AttributeProto::INT: out.kind = Kind::Int; out.i = a.i(); break;
        case onnx::AttributeProto::FLOAT: out.kind = Kind::Float; out.f = a.f(); break;
        case onnx::AttributeProto::STRING: out.kind = Kind::String; out.s = a.s(); break;
        case onnx::AttributeProto::INTS:
            out.kind = Kind::Ints;
            out.ints.assign(a.ints().begin(), a.ints().end());
            break;
        case onnx::AttributeProto::FLOATS:
            out.kind = Kind::Floats;
            out.floats.assign(a.floats().begin(), a.floats().end());
            break;
        case onnx::AttributeProto::TENSOR:
            out.kind = Kind::Tensor;
            out.t = detail::from_proto(a.t(), base_dir);
            break;
        default:
            throw GraphError(fmt::format("attribute '{}' has unsupported type {}", a.name(), static_cast<int>(a.type())));
    }
    return out;
}

std::shared_ptr<Session::Impl> build(const onnx::ModelProto& model, const std::filesystem::path& base_dir) {
    auto impl = std::make_shared<Session::Impl>();
    for (const auto& op : model.opset_import()) {
        if (op.domain().empty() || op.domain() == "ai.onnx") impl->opset = op.version();
    }
    if (impl->opset == 0) impl->opset = 1;

    const auto& g = model.graph();
    std::unordered_map<std::string, int> slot;
    auto slot_of = [&](const std::string& name) {
        auto [it, inserted] = slot.emplace(name, impl->n_slots);
        if (inserted) ++impl->n_slots;
        return it->second;
    };

    std::set<std::string> initializer_names;
    for (const auto& init : g.initializer()) {
        const int s = slot_of(init.name());
        impl->constant_of_slot.resize(static_cast<size_t>(impl->n_slots), -1);
        impl->constant_of_slot[static_cast<size_t>(s)] = static_cast<int>(impl->constants.size());
        impl->constants.push_back(detail::from_proto(init, base_dir));
        initializer_names.insert(init.name());
    }
    for (const auto& in : g.input()) {
        if (initializer_names.count(in.name())) continue;
        impl->inputs.push_back(value_info(in));
        impl->input_slots.push_back(slot_of(in.name()));
    }

    const auto& reg = detail::registry();
    std::set<std::string> unsupported;
    for (const auto& n : g.node()) {
        detail::Node node;
        node.name = n.name();
        node.op_type = n.op_type();
        node.opset = impl->opset;
        if (!n.domain().empty() && n.domain() != "ai.onnx") {
            unsupported.insert(n.domain() + "::" + n.op_type());
            continue;
        }
        auto fn = reg.find(n.op_type());
        if (fn == reg.end()) {
            unsupported.insert(n.op_type());
            continue;
        }
        for (const auto& name : n.input()) {
            if (name.empty()) {
                node.inputs.push_back(-1);
                continue;
            }
            if (!slot.count(name)) {
                throw GraphError(fmt::format("node '{}' ({}) reads undefined value '{}'", n.name(), n.op_type(), name));
            }
            node.inputs.push_back(slot.at(name));
        }
        for (const auto& name : n.output()) node.outputs.push_back(name.empty() ? -1 : slot_of(name));
        for (const auto& a : n.attribute()) node.attrs.emplace(a.name(), convert_attribute(a, base_dir));
        impl->fns.push_back(fn->second);
        impl->nodes.push_back(std::move(node));
    }
    if (!unsupported.empty()) {
        std::string names;
        for (const auto& u : unsupported) names += (names.empty() ? "" : ", ") + u;
        throw GraphError("graph uses unsupported ops: " + names);
    }
    for (const auto& out : g.output()) {
        if (!slot.count(out.name())) throw GraphError("graph output '" + out.name() + "' is never produced");
        impl->outputs.push_back(value_info(out));
        impl->output_slots.push_back(slot.at(out.name()));
    }
    impl->constant_of_slot.resize(static_cast<size_t>(impl->n_slots), -1);

    // Free each intermediate right after its last reader.
    std::vector<int> last_use(static_cast<size_t>(impl->n_slots), -1);
    for (size_t i = 0; i < impl->nodes.size(); ++i) {
        for (int s : impl->nodes[i].inputs) {
            if (s >= 0) last_use[static_cast<size_t>(s)] = static_cast<int>(i);
        }
    }
    std::set<int> keep(impl->output_slots.begin(), impl->output_slots.end());
    impl->release_after.resize(impl->nodes.size());
    for (int s = 0; s < impl->n_slots; ++s) {
        const int u = last_use[static_cast<size_t>(s)];
        if (u < 0 || keep.count(s) || impl->constant_of_slot[static_cast<size_t>(s)] >= 0) continue;
        impl->release_after[static_cast<size_t>(u)].push_back(s);
    }
    return impl;
}

void check_feed(const ValueInfo& info, const Tensor& t) {
    if (is_floating(info.dtype) != is_floating(t.dtype())) {
        throw GraphError(fmt::format("input '{}' expects {}, got {}", info.name, to_string(info.dtype), to_string(t.dtype())));
    }
    if (!info.dims.empty()) {
        if (info.dims.size() != t.shape().size()) {
            throw GraphError(fmt::format("input '{}' expects rank {}, got shape {}", info.name, info.dims.size(), shape_string(t.shape())));
        }
        for (size_t d = 0; d < info.dims.size(); ++d) {
            if (info.dims[d] && *info.dims[d] != t.shape()[d]) {
                throw GraphError(fmt::format("input '{}' dimension {} must be {}, got shape {}", info.name, d, *info.dims[d], shape_string(t.shape())));
            }
        }
    }
}

}  // namespace

Session Session::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GraphError("cannot open graph file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_bytes(ss.str(), path.parent_path());
}

Session Session::from_bytes(const std::string& bytes, const std::filesystem::path& base_dir) {
    google::protobuf::io::ArrayInputStream raw(bytes.data(), static_cast<int>(bytes.size()));
    google::protobuf::io::CodedInputStream coded(&raw);
    coded.SetTotalBytesLimit(INT_MAX);
    onnx::ModelProto model;
    if (!model.ParseFromCodedStream(&coded) || !coded.ConsumedEntireMessage()) {
        throw GraphError("graph file is not a valid ONNX model");
    }
    if (!model.has_graph()) throw GraphError("ONNX model has no graph");
    return Session(build(model, base_dir));
}

const std::vector<ValueInfo>& Session::inputs() const { return impl_->inputs; }
const std::vector<ValueInfo>& Session::outputs() const { return impl_->outputs; }
int64_t Session::opset() const { return impl_->opset; }

std::vector<std::string> Session::op_types() const {
    std::set<std::string> s;
    for (const auto& n : impl_->nodes) s.insert(n.op_type);
    return {s.begin(), s.end()};
}

std::vector<Tensor> Session::run(std::span<const Tensor> feeds) const {
    const Impl& g = *impl_;
    if (feeds.size() != g.inputs.size()) {
        throw GraphError(fmt::format("graph takes {} inputs, {} given", g.inputs.size(), feeds.size()));
    }
    std::vector<Tensor> values(static_cast<size_t>(g.n_slots));
    std::vector<const Tensor*> env(static_cast<size_t>(g.n_slots), nullptr);
    for (size_t s = 0; s < env.size(); ++s) {
        if (g.constant_of_slot[s] >= 0) env[s] = &g.constants[static_cast<size_t>(g.constant_of_slot[s])];
    }
    for (size_t i = 0; i < feeds.size(); ++i) {
        check_feed(g.inputs[i], feeds[i]);
        const auto s = static_cast<size_t>(g.input_slots[i]);
        values[s] = feeds[i];
        env[s] = &values[s];
    }

    std::vector<const Tensor*> args;
    std::vector<Tensor> outs;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const detail::Node& node = g.nodes[i];
        args.clear();
        for (int s : node.inputs) {
            if (s < 0) {
                args.push_back(nullptr);
                continue;
            }
            const Tensor* t = env[static_cast<size_t>(s)];
            if (t == nullptr) throw GraphError(fmt::format("node '{}' ({}) read a value before it was computed", node.name, node.op_type));
            args.push_back(t);
        }
        outs.assign(node.outputs.size(), Tensor{});
        try {
            g.fns[i](node, args, outs);
        } catch (const GraphError& e) {
            throw GraphError(fmt::format("{} node '{}': {}", node.op_type, node.name, e.what()));
        }
        for (size_t k = 0; k < node.outputs.size(); ++k) {
            const int s = node.outputs[k];
            if (s < 0) continue;
            values[static_cast<size_t>(s)] = std::move(outs[k]);
            env[static_cast<size_t>(s)] = &values[static_cast<size_t>(s)];
        }
        for (int s : g.release_after[i]) {
            values[static_cast<size_t>(s)] = Tensor{};
            env[static_cast<size_t>(s)] = nullptr;
        }
    }

    std::vector<Tensor> result;
    result.reserve(g.output_slots.size());
    for (int s : g.output_slots) {
        const Tensor* t = env[static_cast<size_t>(s)];
        if (t == nullptr) throw GraphError("graph output was not computed");
        result.push_back(*t);
    }
    return result;
}

std::vector<Tensor> Session::run(const std::map<std::string, Tensor>& feeds) const {
    std::vector<Tensor> ordered;
    for (const auto& info : impl_->inputs) {
        auto it = feeds.find(info.name);
        if (it == feeds.end()) throw GraphError("missing feed for input '" + info.name + "'");
        ordered.push_back(it->second);
    }
    return run(ordered);
}

std::vector<std::string> supported_ops() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : detail::registry()) names.push_back(name);
    return names;
}

}  // namespace zsmad::graph
