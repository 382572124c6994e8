#include "proto_convert.hpp"

#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace zsmad::graph::detail {

DataType from_onnx_type(int32_t elem_type) {
    switch (elem_type) {
        case onnx::TensorProto::FLOAT: return DataType::Float;
        case onnx::TensorProto::DOUBLE: return DataType::Double;
        case onnx::TensorProto::INT64: return DataType::Int64;
        case onnx::TensorProto::INT32: return DataType::Int32;
        case onnx::TensorProto::INT8: return DataType::Int8;
        case onnx::TensorProto::UINT8: return DataType::UInt8;
        case onnx::TensorProto::BOOL: return DataType::Bool;
        default: break;
    }
    throw GraphError(fmt::format("unsupported tensor element type {}", elem_type));
}

int32_t to_onnx_type(DataType t) {
    switch (t) {
        case DataType::Float: return onnx::TensorProto::FLOAT;
        case DataType::Double: return onnx::TensorProto::DOUBLE;
        case DataType::Int64: return onnx::TensorProto::INT64;
        case DataType::Int32: return onnx::TensorProto::INT32;
        case DataType::Int8: return onnx::TensorProto::INT8;
        case DataType::UInt8: return onnx::TensorProto::UINT8;
        case DataType::Bool: return onnx::TensorProto::BOOL;
    }
    return onnx::TensorProto::UNDEFINED;
}

namespace {

size_t element_size(DataType t) {
    switch (t) {
        case DataType::Float: return 4;
        case DataType::Double: return 8;
        case DataType::Int64: return 8;
        case DataType::Int32: return 4;
        case DataType::Int8:
        case DataType::UInt8:
        case DataType::Bool: return 1;
    }
    return 0;
}

std::string read_external(const onnx::TensorProto& proto, const std::filesystem::path& base_dir) {
    std::string location;
    int64_t offset = 0;
    int64_t length = -1;
    for (const auto& kv : proto.external_data()) {
        if (kv.key() == "location") location = kv.value();
        else if (kv.key() == "offset") offset = std::stoll(kv.value());
        else if (kv.key() == "length") length = std::stoll(kv.value());
    }
    if (location.empty()) throw GraphError("external tensor '" + proto.name() + "' has no location");
    const auto path = base_dir / location;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GraphError("cannot open external data file " + path.string());
    in.seekg(0, std::ios::end);
    const int64_t file_size = in.tellg();
    if (length < 0) length = file_size - offset;
    if (offset < 0 || offset + length > file_size) {
        throw GraphError("external data range out of bounds for tensor '" + proto.name() + "'");
    }
    std::string bytes(static_cast<size_t>(length), '\0');
    in.seekg(offset);
    in.read(bytes.data(), length);
    return bytes;
}

template <class T>
void decode_raw(const std::string& raw, std::vector<float>* f, std::vector<int64_t>* i, size_t n) {
    if (raw.size() != n * sizeof(T)) throw GraphError("raw tensor data has the wrong byte length");
    for (size_t k = 0; k < n; ++k) {
        T v;
        std::memcpy(&v, raw.data() + k * sizeof(T), sizeof(T));
        if (f) (*f)[k] = static_cast<float>(v);
        else (*i)[k] = static_cast<int64_t>(v);
    }
}

}  // namespace

Tensor from_proto(const onnx::TensorProto& proto, const std::filesystem::path& base_dir) {
    const DataType dtype = from_onnx_type(proto.data_type());
    Shape shape(proto.dims().begin(), proto.dims().end());
    const auto n = static_cast<size_t>(element_count(shape));

    const bool external = proto.data_location() == onnx::TensorProto::EXTERNAL;
    if (external || proto.has_raw_data()) {
        const std::string raw = external ? read_external(proto, base_dir) : proto.raw_data();
        if (is_floating(dtype)) {
            std::vector<float> f(n);
            if (dtype == DataType::Float) decode_raw<float>(raw, &f, nullptr, n);
            else decode_raw<double>(raw, &f, nullptr, n);
            Tensor t = Tensor::zeros(dtype, std::move(shape));
            std::copy(f.begin(), f.end(), t.float_data().begin());
            return t;
        }
        std::vector<int64_t> v(n);
        switch (dtype) {
            case DataType::Int64: decode_raw<int64_t>(raw, nullptr, &v, n); break;
            case DataType::Int32: decode_raw<int32_t>(raw, nullptr, &v, n); break;
            case DataType::Int8: decode_raw<int8_t>(raw, nullptr, &v, n); break;
            case DataType::UInt8:
            case DataType::Bool: decode_raw<uint8_t>(raw, nullptr, &v, n); break;
            default: break;
        }
        return Tensor::ints(dtype, std::move(shape), std::move(v));
    }

    if (dtype == DataType::Float) {
        if (static_cast<size_t>(proto.float_data_size()) != n) throw GraphError("float_data length mismatch in '" + proto.name() + "'");
        return Tensor::floats(std::move(shape), {proto.float_data().begin(), proto.float_data().end()});
    }
    if (dtype == DataType::Double) {
        if (static_cast<size_t>(proto.double_data_size()) != n) throw GraphError("double_data length mismatch in '" + proto.name() + "'");
        Tensor t = Tensor::zeros(DataType::Double, std::move(shape));
        auto out = t.float_data();
        for (size_t k = 0; k < n; ++k) out[k] = static_cast<float>(proto.double_data(static_cast<int>(k)));
        return t;
    }
    std::vector<int64_t> v;
    if (dtype == DataType::Int64) v.assign(proto.int64_data().begin(), proto.int64_data().end());
    else v.assign(proto.int32_data().begin(), proto.int32_data().end());
    if (v.size() != n) throw GraphError("integer data length mismatch in '" + proto.name() + "'");
    return Tensor::ints(dtype, std::move(shape), std::move(v));
}

void to_proto(const Tensor& t, const std::string& name, onnx::TensorProto& proto) {
    proto.set_name(name);
    proto.set_data_type(to_onnx_type(t.dtype()));
    for (int64_t d : t.shape()) proto.add_dims(d);
    const auto n = static_cast<size_t>(t.size());
    std::string raw(n * element_size(t.dtype()), '\0');
    auto put = [&](auto value, size_t k) { std::memcpy(raw.data() + k * sizeof(value), &value, sizeof(value)); };
    for (size_t k = 0; k < n; ++k) {
        switch (t.dtype()) {
            case DataType::Float: put(t.float_data()[k], k); break;
            case DataType::Double: put(static_cast<double>(t.float_data()[k]), k); break;
            case DataType::Int64: put(t.int_data()[k], k); break;
            case DataType::Int32: put(static_cast<int32_t>(t.int_data()[k]), k); break;
            case DataType::Int8: put(static_cast<int8_t>(t.int_data()[k]), k); break;
            case DataType::UInt8:
            case DataType::Bool: put(static_cast<uint8_t>(t.int_data()[k]), k); break;
        }
    }
    proto.set_raw_data(raw);
}

}  // namespace zsmad::graph::detail
