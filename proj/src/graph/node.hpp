#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsmad/graph/tensor.hpp"

namespace zsmad::graph::detail {

struct Attribute {
    enum class Kind { Int, Float, String, Ints, Floats, Tensor };
    Kind kind = Kind::Int;
    int64_t i = 0;
    float f = 0.0f;
    std::string s;
    std::vector<int64_t> ints;
    std::vector<float> floats;
    graph::Tensor t;
};

struct Node {
    std::string name;
    std::string op_type;
    std::vector<int> inputs;  // value slot, -1 for an omitted optional input
    std::vector<int> outputs;
    std::map<std::string, Attribute> attrs;
    int64_t opset = 0;

    bool has(const std::string& key) const { return attrs.count(key) != 0; }
    int64_t attr_int(const std::string& key, int64_t fallback) const;
    float attr_float(const std::string& key, float fallback) const;
    std::string attr_string(const std::string& key, const std::string& fallback) const;
    std::optional<std::vector<int64_t>> attr_ints(const std::string& key) const;
    const graph::Tensor* attr_tensor(const std::string& key) const;
};

using Inputs = std::span<const Tensor* const>;
using OpFn = std::function<void(const Node&, Inputs, std::vector<Tensor>&)>;
using Registry = std::map<std::string, OpFn>;

const Registry& registry();

void register_elementwise_ops(Registry& r);
void register_shape_ops(Registry& r);
void register_nn_ops(Registry& r);

// Input i, or throws when it is missing.
const Tensor& input(Inputs in, size_t i, const Node& node);
// Input i, or nullptr when it was omitted.
const Tensor* optional_input(Inputs in, size_t i);

}  // namespace zsmad::graph::detail
