#pragma once

#include <filesystem>

#include "onnx.pb.h"
#include "zsmad/graph/tensor.hpp"

namespace zsmad::graph::detail {

DataType from_onnx_type(int32_t elem_type);
int32_t to_onnx_type(DataType t);

Tensor from_proto(const onnx::TensorProto& proto, const std::filesystem::path& base_dir);
void to_proto(const Tensor& t, const std::string& name, onnx::TensorProto& proto);

}  // namespace zsmad::graph::detail
