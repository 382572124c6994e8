#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "zsmad/graph/tensor.hpp"

namespace zsmad::graph {

using AttributeValue =
    std::variant<int64_t, float, std::string, std::vector<int64_t>, std::vector<float>, Tensor>;

struct NamedAttribute {
    std::string name;
    AttributeValue value;
};

// Dimension for graph input/output declarations: a fixed size or a symbol.
struct Dim {
    Dim(int64_t v) : value(v) {}  // NOLINT(google-explicit-constructor)
    Dim(const char* s) : symbol(s) {}  // NOLINT(google-explicit-constructor)
    int64_t value = -1;
    std::string symbol;
};

// Writes small ONNX graphs. Serialization is deterministic: the same sequence
// of calls always yields the same bytes.
class ModelBuilder {
public:
    explicit ModelBuilder(std::string graph_name, int64_t opset = 17);
    ~ModelBuilder();
    ModelBuilder(ModelBuilder&&) noexcept;
    ModelBuilder& operator=(ModelBuilder&&) noexcept;

    void add_input(const std::string& name, DataType dtype, const std::vector<Dim>& dims);
    void add_output(const std::string& name, DataType dtype, const std::vector<Dim>& dims);
    void add_initializer(const std::string& name, const Tensor& value);
    void add_node(const std::string& op_type,
                  const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs,
                  const std::vector<NamedAttribute>& attributes = {});

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace zsmad::graph
