#include "zsmad/graph/tensor.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace zsmad::graph {

bool is_floating(DataType t) {
    return t == DataType::Float || t == DataType::Double;
}

std::string to_string(DataType t) {
    switch (t) {
        case DataType::Float: return "float32";
        case DataType::Double: return "float64";
        case DataType::Int64: return "int64";
        case DataType::Int32: return "int32";
        case DataType::Int8: return "int8";
        case DataType::UInt8: return "uint8";
        case DataType::Bool: return "bool";
    }
    return "?";
}

int64_t element_count(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw GraphError(fmt::format("negative dimension in shape {}", shape_string(shape)));
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    return fmt::format("[{}]", fmt::join(shape, ","));
}

Tensor Tensor::floats(Shape shape, std::vector<float> values) {
    Tensor t;
    t.dtype_ = DataType::Float;
    t.shape_ = std::move(shape);
    if (static_cast<int64_t>(values.size()) != element_count(t.shape_)) {
        throw GraphError(fmt::format("tensor of shape {} given {} values", shape_string(t.shape_), values.size()));
    }
    t.f_ = std::move(values);
    t.valid_ = true;
    return t;
}

Tensor Tensor::ints(DataType dtype, Shape shape, std::vector<int64_t> values) {
    if (is_floating(dtype)) throw GraphError("Tensor::ints called with a floating type");
    Tensor t;
    t.dtype_ = dtype;
    t.shape_ = std::move(shape);
    if (static_cast<int64_t>(values.size()) != element_count(t.shape_)) {
        throw GraphError(fmt::format("tensor of shape {} given {} values", shape_string(t.shape_), values.size()));
    }
    t.i_ = std::move(values);
    t.valid_ = true;
    return t;
}

Tensor Tensor::zeros(DataType dtype, Shape shape) {
    const auto n = static_cast<size_t>(element_count(shape));
    if (is_floating(dtype)) {
        Tensor t = floats(std::move(shape), std::vector<float>(n, 0.0f));
        t.dtype_ = dtype;
        return t;
    }
    return ints(dtype, std::move(shape), std::vector<int64_t>(n, 0));
}

int64_t Tensor::dim(int64_t axis) const {
    if (axis < 0) axis += rank();
    if (axis < 0 || axis >= rank()) throw GraphError(fmt::format("axis {} out of range for rank {}", axis, rank()));
    return shape_[static_cast<size_t>(axis)];
}

std::span<const float> Tensor::float_data() const {
    if (!is_floating(dtype_)) throw GraphError("expected a floating tensor, got " + to_string(dtype_));
    return f_;
}

std::span<float> Tensor::float_data() {
    if (!is_floating(dtype_)) throw GraphError("expected a floating tensor, got " + to_string(dtype_));
    return f_;
}

std::span<const int64_t> Tensor::int_data() const {
    if (is_floating(dtype_)) throw GraphError("expected an integer tensor, got " + to_string(dtype_));
    return i_;
}

std::span<int64_t> Tensor::int_data() {
    if (is_floating(dtype_)) throw GraphError("expected an integer tensor, got " + to_string(dtype_));
    return i_;
}

double Tensor::at(int64_t i) const {
    return is_floating(dtype_) ? static_cast<double>(f_[static_cast<size_t>(i)])
                               : static_cast<double>(i_[static_cast<size_t>(i)]);
}

std::vector<int64_t> Tensor::to_int_vector() const {
    if (!is_floating(dtype_)) return i_;
    std::vector<int64_t> out;
    out.reserve(f_.size());
    for (float v : f_) out.push_back(static_cast<int64_t>(v));
    return out;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != size()) {
        throw GraphError(fmt::format("cannot reshape {} to {}", shape_string(shape_), shape_string(shape)));
    }
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

}  // namespace zsmad::graph
