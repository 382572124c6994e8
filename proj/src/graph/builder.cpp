#include "zsmad/graph/builder.hpp"

#include <fstream>

#include "onnx.pb.h"
#include "proto_convert.hpp"

namespace zsmad::graph {

struct ModelBuilder::Impl {
    onnx::ModelProto model;
};

namespace {

void declare(onnx::ValueInfoProto* vi, const std::string& name, DataType dtype, const std::vector<Dim>& dims) {
    vi->set_name(name);
    auto* tt = vi->mutable_type()->mutable_tensor_type();
    tt->set_elem_type(detail::to_onnx_type(dtype));
    auto* shape = tt->mutable_shape();
    for (const Dim& d : dims) {
        auto* dim = shape->add_dim();
        if (d.symbol.empty()) dim->set_dim_value(d.value);
        else dim->set_dim_param(d.symbol);
    }
}

struct AttributeWriter {
    onnx::AttributeProto* a;
    void operator()(int64_t v) const {
        a->set_type(onnx::AttributeProto::INT);
        a->set_i(v);
    }
    void operator()(float v) const {
        a->set_type(onnx::AttributeProto::FLOAT);
        a->set_f(v);
    }
    void operator()(const std::string& v) const {
        a->set_type(onnx::AttributeProto::STRING);
        a->set_s(v);
    }
    void operator()(const std::vector<int64_t>& v) const {
        a->set_type(onnx::AttributeProto::INTS);
        for (int64_t x : v) a->add_ints(x);
    }
    void operator()(const std::vector<float>& v) const {
        a->set_type(onnx::AttributeProto::FLOATS);
        for (float x : v) a->add_floats(x);
    }
    void operator()(const Tensor& v) const {
        a->set_type(onnx::AttributeProto::TENSOR);
        detail::to_proto(v, "", *a->mutable_t());
    }
};

}  // namespace

ModelBuilder::ModelBuilder(std::string graph_name, int64_t opset) : impl_(std::make_unique<Impl>()) {
    impl_->model.set_ir_version(8);
    impl_->model.set_producer_name("zsmad");
    auto* op = impl_->model.add_opset_import();
    op->set_domain("");
    op->set_version(opset);
    impl_->model.mutable_graph()->set_name(std::move(graph_name));
}

ModelBuilder::~ModelBuilder() = default;
ModelBuilder::ModelBuilder(ModelBuilder&&) noexcept = default;
ModelBuilder& ModelBuilder::operator=(ModelBuilder&&) noexcept = default;

void ModelBuilder::add_input(const std::string& name, DataType dtype, const std::vector<Dim>& dims) {
    declare(impl_->model.mutable_graph()->add_input(), name, dtype, dims);
}

void ModelBuilder::add_output(const std::string& name, DataType dtype, const std::vector<Dim>& dims) {
    declare(impl_->model.mutable_graph()->add_output(), name, dtype, dims);
}

void ModelBuilder::add_initializer(const std::string& name, const Tensor& value) {
    detail::to_proto(value, name, *impl_->model.mutable_graph()->add_initializer());
}

void ModelBuilder::add_node(const std::string& op_type,
                            const std::vector<std::string>& inputs,
                            const std::vector<std::string>& outputs,
                            const std::vector<NamedAttribute>& attributes) {
    auto* g = impl_->model.mutable_graph();
    auto* n = g->add_node();
    n->set_op_type(op_type);
    n->set_name(op_type + "_" + std::to_string(g->node_size() - 1));
    for (const auto& i : inputs) n->add_input(i);
    for (const auto& o : outputs) n->add_output(o);
    for (const auto& attr : attributes) {
        auto* a = n->add_attribute();
        a->set_name(attr.name);
        std::visit(AttributeWriter{a}, attr.value);
    }
}

std::string ModelBuilder::serialize() const {
    std::string bytes;
    if (!impl_->model.SerializeToString(&bytes)) throw GraphError("failed to serialize model");
    return bytes;
}

void ModelBuilder::save(const std::filesystem::path& path) const {
    const std::string bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GraphError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw GraphError("failed writing " + path.string());
}

}  // namespace zsmad::graph
